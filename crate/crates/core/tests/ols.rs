use proptest::prelude::*;
use pseudopost_core::{fit_ols, residual, Dataset, SurrogateFit};

/// Solves the normal equations `(XᵀX) β = Xᵀy` by Gauss-Jordan elimination
/// with partial pivoting, independently of the library's QR path.
fn normal_equation_oracle(xs: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
    let k = xs[0].len() + 1;
    let mut a = vec![vec![0.0; k + 1]; k];
    for (x, &y) in xs.iter().zip(ys) {
        let row: Vec<f64> = std::iter::once(1.0).chain(x.iter().copied()).collect();
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * y;
        }
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..k {
            if r != col {
                let f = a[r][col];
                let pivot_row = a[col].clone();
                for (v, pv) in a[r].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    a.iter().map(|r| r[k]).collect()
}

/// Explicit 2 × 2 cofactor inverse for one covariate.
fn cofactor_oracle(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    ((sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det)
}

fn lcg(state: &mut u64) -> f64 {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn fifty_point_line_matches_cofactor_oracle() {
    let mut s = 42u64;
    let xs: Vec<f64> = (0..50).map(|_| 10.0 * lcg(&mut s) - 5.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| {
            let u1 = lcg(&mut s).max(1e-300);
            let u2 = lcg(&mut s);
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            1.0 + 0.5 * x + 0.3 * z
        })
        .collect();
    let data = Dataset::new(xs.iter().map(|&x| vec![x]).collect(), ys.clone()).unwrap();
    let fit = fit_ols(&data).unwrap();
    let (b0, b1) = cofactor_oracle(&xs, &ys);
    assert!((fit.beta[0] - b0).abs() < 1e-10);
    assert!((fit.beta[1] - b1).abs() < 1e-10);
    assert!((fit.beta[1] - 0.5).abs() < 0.1);
}

fn design() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|d| {
        (d + 2..=100usize).prop_flat_map(move |n| {
            (
                prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n),
                prop::collection::vec(-50.0f64..50.0, n),
            )
        })
    })
}

fn scale(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(1.0f64, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn agrees_with_normal_equations((xs, ys) in design()) {
        let data = Dataset::new(xs.clone(), ys.clone()).unwrap();
        let fit = match fit_ols(&data) {
            Ok(f) => f,
            Err(_) => return Ok(()),
        };
        let oracle = normal_equation_oracle(&xs, &ys);
        for (b, o) in fit.beta.iter().zip(&oracle) {
            prop_assert!((b - o).abs() <= 1e-8 * o.abs().max(1.0), "{} vs {}", b, o);
        }
    }

    #[test]
    fn residuals_are_orthogonal((xs, ys) in design()) {
        let data = Dataset::new(xs.clone(), ys.clone()).unwrap();
        let Ok(fit) = fit_ols(&data) else { return Ok(()); };
        let n = xs.len() as f64;
        let r: Vec<f64> = xs.iter().zip(&ys).map(|(x, &y)| residual(&fit, x, y).unwrap()).collect();
        let sy = scale(ys.iter().copied());
        prop_assert!(r.iter().sum::<f64>().abs() <= 1e-8 * n * sy);
        for k in 0..xs[0].len() {
            let sx = scale(xs.iter().map(|x| x[k]));
            let dot: f64 = r.iter().zip(&xs).map(|(r, x)| r * x[k]).sum();
            prop_assert!(dot.abs() <= 1e-8 * n * sx * sy);
        }
    }

    #[test]
    fn refit_on_fitted_values_is_idempotent((xs, ys) in design()) {
        let data = Dataset::new(xs.clone(), ys).unwrap();
        let Ok(fit) = fit_ols(&data) else { return Ok(()); };
        let fitted: Vec<f64> = xs.iter().map(|x| fit.predict(x).unwrap()).collect();
        let again = fit_ols(&Dataset::new(xs, fitted).unwrap()).unwrap();
        for (a, b) in again.beta.iter().zip(&fit.beta) {
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn shifting_y_moves_only_the_intercept((xs, ys) in design(), c in -100.0f64..100.0) {
        let Ok(fit) = fit_ols(&Dataset::new(xs.clone(), ys.clone()).unwrap()) else { return Ok(()); };
        let shifted: Vec<f64> = ys.iter().map(|y| y + c).collect();
        let moved = fit_ols(&Dataset::new(xs, shifted).unwrap()).unwrap();
        prop_assert!((moved.beta[0] - fit.beta[0] - c).abs() <= 1e-10 * (fit.beta[0].abs() + c.abs()).max(1.0));
        for (a, b) in moved.beta[1..].iter().zip(&fit.beta[1..]) {
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn zero_projection_residual_is_y(x in prop::collection::vec(-1e3f64..1e3, 0..4), y in -1e3f64..1e3) {
        let fit = SurrogateFit::from_coefficients(vec![0.0; x.len() + 1]).unwrap();
        prop_assert_eq!(residual(&fit, &x, y).unwrap(), y);
    }
}
