//! Cross-checks the tridiagonal solver path against an independently
//! written reference: element-loop dense assembly with Gauss quadrature
//! for both coefficient and load, solved by LU with partial pivoting.

use mlsmc::fem::{
    assemble_and_solve, constant_coefficient_solution, point_value, CoefficientField,
    FORCING_SLOPE,
};
use mlsmc::stats::fit_loglog;

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_rule(points: usize) -> (Vec<f64>, Vec<f64>) {
    match points {
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        5 => (
            vec![
                -0.906_179_845_938_664,
                -0.538_469_310_105_683_1,
                0.0,
                0.538_469_310_105_683_1,
                0.906_179_845_938_664,
            ],
            vec![
                0.236_926_885_056_189_08,
                0.478_628_670_499_366_47,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_47,
                0.236_926_885_056_189_08,
            ],
        ),
        _ => panic!("unsupported rule"),
    }
}

/// Dense reference: scatter per-element 2x2 stiffness blocks into a full
/// matrix, integrate the load by quadrature instead of the closed form,
/// and solve with pivoted elimination. Shares no code with the library
/// path beyond the coefficient evaluation itself.
fn dense_reference(
    field: &CoefficientField,
    u: &[f64],
    elements: usize,
    quad_points: usize,
) -> Vec<f64> {
    let h = 1.0 / elements as f64;
    let (nodes, weights) = gauss_rule(quad_points);
    let n = elements - 1;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for e in 0..elements {
        let x_left = e as f64 * h;
        let mut s_e = 0.0;
        for (t, w) in nodes.iter().zip(&weights) {
            let x = x_left + h * 0.5 * (t + 1.0);
            s_e += w * 0.5 * h * field.coefficient_at(u, x).unwrap();
        }
        // Hat gradients are -+1/h on the element, so the local stiffness
        // block is (s_e / h^2) [[1, -1], [-1, 1]] over nodes (e, e+1).
        let k = s_e / (h * h);
        let global = [e, e + 1];
        for (li, &gi) in global.iter().enumerate() {
            if gi == 0 || gi == elements {
                continue;
            }
            for (lj, &gj) in global.iter().enumerate() {
                if gj == 0 || gj == elements {
                    continue;
                }
                let sign = if li == lj { 1.0 } else { -1.0 };
                a[gi - 1][gj - 1] += sign * k;
            }
            // Load f(x) phi_i(x) by the same quadrature; the integrand is
            // quadratic, so any rule here is exact and the reference load
            // must match the library's closed form.
            let mut load = 0.0;
            for (t, w) in nodes.iter().zip(&weights) {
                let x = x_left + h * 0.5 * (t + 1.0);
                let hat = if li == 0 {
                    (x_left + h - x) / h
                } else {
                    (x - x_left) / h
                };
                load += w * 0.5 * h * FORCING_SLOPE * x * hat;
            }
            b[gi - 1] += load;
        }
    }
    solve_dense(a, b)
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row = a[col].clone();
        assert!(pivot_row[col].abs() > 0.0, "singular reference system");
        for row in col + 1..n {
            let f = a[row][col] / pivot_row[col];
            for (dst, &src) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

fn wiggly_latent(dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|k| if k % 2 == 0 { 0.8 } else { -0.6 })
        .collect()
}

#[test]
fn thomas_path_matches_dense_reference_bit_for_bit_quadrature() {
    // Same 2-point rule on both sides: the two paths assemble the same
    // discrete system through different code, so solutions must agree to
    // solver roundoff.
    let field = CoefficientField::benchmark();
    let u = wiggly_latent(field.dim());
    for elements in [8usize, 32, 128] {
        let fast = assemble_and_solve(&field, &u, elements).unwrap();
        let slow = dense_reference(&field, &u, elements, 2);
        for (i, (a, b)) in fast.nodal_values.iter().zip(&slow).enumerate() {
            let scale = b.abs().max(1.0);
            assert!(
                (a - b).abs() <= 1e-10 * scale,
                "{elements} elements, node {}: {a} vs {b}",
                i + 1
            );
        }
    }
}

#[test]
fn coefficient_quadrature_error_vanishes_under_refinement() {
    // Against a 5-point reference the 2-point coefficient integration
    // perturbs the solution at roughly fourth order; a factor >= 4 per
    // mesh doubling is asserted as the conservative bound.
    let field = CoefficientField::benchmark();
    let u = wiggly_latent(field.dim());
    let gap_at = |elements: usize| -> f64 {
        let two = dense_reference(&field, &u, elements, 2);
        let five = dense_reference(&field, &u, elements, 5);
        two.iter()
            .zip(&five)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let gaps: Vec<f64> = [16usize, 32, 64].iter().map(|&e| gap_at(e)).collect();
    assert!(gaps[0] > 0.0, "rules unexpectedly coincide");
    assert!(gaps[1] < gaps[0] / 4.0, "{gaps:?}");
    assert!(gaps[2] < gaps[1] / 4.0, "{gaps:?}");
}

#[test]
fn variable_coefficient_converges_at_second_order_to_dense_reference() {
    let field = CoefficientField::benchmark();
    let u = wiggly_latent(field.dim());
    let reference = dense_reference(&field, &u, 2048, 5);
    let truth_mid = reference[1023]; // node at x = 1/2
    let meshes = [8usize, 16, 32, 64, 128];
    let mut points = Vec::new();
    for &elements in &meshes {
        let sol = assemble_and_solve(&field, &u, elements).unwrap();
        let err = (point_value(&sol, 0.5).unwrap() - truth_mid).abs();
        points.push((1.0 / elements as f64, err));
    }
    let fit = fit_loglog(&points).unwrap();
    assert!(
        (fit.slope - 2.0).abs() <= 0.2,
        "observed order {:.3}",
        fit.slope
    );
}

#[test]
fn interpolated_reads_converge_at_second_order_off_the_mesh() {
    // Constant coefficient: nodal values are exact, so all the error in a
    // non-nodal read is linear interpolation error, which is O(h^2).
    let field = CoefficientField::new(0.15, vec![0.0]).unwrap();
    let u = [0.0];
    let x = 1.0 / 3.0;
    let truth = constant_coefficient_solution(0.15, x);
    let mut points = Vec::new();
    for elements in [8usize, 16, 32, 64, 128, 256] {
        let sol = assemble_and_solve(&field, &u, elements).unwrap();
        points.push((
            1.0 / elements as f64,
            (point_value(&sol, x).unwrap() - truth).abs(),
        ));
    }
    let fit = fit_loglog(&points).unwrap();
    assert!(
        (fit.slope - 2.0).abs() <= 0.2,
        "observed order {:.3}",
        fit.slope
    );
}
