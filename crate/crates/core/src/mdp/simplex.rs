use super::{StochasticPolicy, Table};
use crate::error::{Error, Result};

/// Euclidean projection onto the probability simplex.
///
/// Sort-then-threshold: with `u` sorted descending, `rho` is the largest `j`
/// with `u_j > (sum_{i<=j} u_i - 1) / j`, and the output is
/// `max(v_i - lambda, 0)` for `lambda = (sum_{i<=rho} u_i - 1) / rho`.
pub fn project_row_to_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(
            "cannot project a vector with non-finite entries",
        ));
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut lambda = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        prefix += uj;
        let candidate = (prefix - 1.0) / (j + 1) as f64;
        if uj > candidate {
            lambda = candidate;
        }
    }
    Ok(v.iter().map(|&x| (x - lambda).max(0.0)).collect())
}

/// Projects every row of `table` onto the simplex.
pub fn project_rows_to_simplex(table: &Table) -> Result<StochasticPolicy> {
    let mut out = table.clone();
    for s in 0..table.rows() {
        let row = project_row_to_simplex(table.row(s))?;
        out.row_mut(s).copy_from_slice(&row);
    }
    StochasticPolicy::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn hand_examples() {
        assert!(close(
            &project_row_to_simplex(&[0.3, 0.7]).unwrap(),
            &[0.3, 0.7]
        ));
        assert!(close(
            &project_row_to_simplex(&[0.6, 0.6]).unwrap(),
            &[0.5, 0.5]
        ));
        assert!(close(
            &project_row_to_simplex(&[2.0, 0.0]).unwrap(),
            &[1.0, 0.0]
        ));
        assert!(close(&project_row_to_simplex(&[-3.0]).unwrap(), &[1.0]));
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert!(project_row_to_simplex(&[]).is_err());
        assert!(project_row_to_simplex(&[f64::NAN, 1.0]).is_err());
    }

    /// KKT certificate: some lambda with out_i = max(v_i - lambda, 0).
    fn kkt_holds(v: &[f64], out: &[f64]) -> bool {
        let support: Vec<usize> = (0..v.len()).filter(|&i| out[i] > 0.0).collect();
        if support.is_empty() {
            return false;
        }
        let lambda = v[support[0]] - out[support[0]];
        let scale = v.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        v.iter()
            .zip(out)
            .all(|(vi, oi)| (oi - (vi - lambda).max(0.0)).abs() <= 1e-12 * scale)
    }

    proptest! {
        #[test]
        fn lands_on_simplex_with_kkt(v in prop::collection::vec(-50.0f64..50.0, 1..8)) {
            let out = project_row_to_simplex(&v).unwrap();
            prop_assert!(out.iter().all(|&x| x >= 0.0));
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(kkt_holds(&v, &out));
        }

        #[test]
        fn idempotent_and_translation_absorbing(
            v in prop::collection::vec(-10.0f64..10.0, 1..8),
            c in -10.0f64..10.0,
        ) {
            let p = project_row_to_simplex(&v).unwrap();
            let pp = project_row_to_simplex(&p).unwrap();
            prop_assert!(p.iter().zip(&pp).all(|(a, b)| (a - b).abs() < 1e-9));
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let ps = project_row_to_simplex(&shifted).unwrap();
            prop_assert!(p.iter().zip(&ps).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }
}
