//! Fixed benchmark inputs, shared by the criterion benches and their smoke test.

use formalcalc::gen::Gen;
use formalcalc::scalar::q;
use formalcalc::sheaf::Cover;
use formalcalc::{FormalDensity, FormalFunction, OpenSet, Result};

/// A density and a function on a discrete base of `points` points.
pub fn discrete_pairing(points: usize, k: usize, trunc: u32) -> Result<(FormalDensity, FormalFunction)> {
    let mut g = Gen::new(1);
    let m = OpenSet::discrete(&Gen::labels(points));
    Ok((g.discrete_density(&m, k, trunc)?, g.discrete_function(&m, k, trunc)?))
}

/// Two formal functions for the truncated product.
pub fn discrete_factors(points: usize, k: usize, trunc: u32) -> Result<(FormalFunction, FormalFunction)> {
    let mut g = Gen::new(2);
    let m = OpenSet::discrete(&Gen::labels(points));
    Ok((g.discrete_function(&m, k, trunc)?, g.discrete_function(&m, k, trunc)?))
}

/// A bump-weighted density with an `x`-derivative and a polynomial function on `(-1, 4)`.
pub fn line_pairing() -> Result<(FormalDensity, FormalFunction)> {
    let mut g = Gen::new(3);
    let dom = OpenSet::bounded(q(-1), q(4));
    Ok((g.line_density(&dom, 1, 1, &q(0), &q(3))?, g.line_function(&dom, 1, 1)?))
}

/// Three overlapping intervals covering `(0, 3)`.
pub fn line_cover() -> Result<Cover> {
    Cover::new(
        OpenSet::bounded(q(0), q(3)),
        vec![
            OpenSet::bounded(q(0), q(3) / q(2)),
            OpenSet::bounded(q(1), q(5) / q(2)),
            OpenSet::bounded(q(2), q(3)),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build_and_evaluate() {
        let (eta, u) = discrete_pairing(8, 2, 3).unwrap();
        eta.pair(&u).unwrap();
        let (a, b) = discrete_factors(8, 2, 3).unwrap();
        a.multiply(&b).unwrap();
        let (eta, u) = line_pairing().unwrap();
        assert!(eta.pair(&u).unwrap().to_c64().norm().is_finite());
        assert_eq!(line_cover().unwrap().len(), 3);
    }
}
