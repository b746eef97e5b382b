//! Tiny dense solvers for the fixed-size systems used by the oracle and the
//! line-shape fitter.

use num_complex::Complex64;

/// Solution of an equilibrated 3×3 complex system with its 1-norm
/// condition number (of the equilibrated matrix).
pub(crate) struct Solved3 {
    pub x: [Complex64; 3],
    pub condition: f64,
}

fn lu_solve<const N: usize>(a: &[[Complex64; N]; N], b: &[Complex64; N]) -> Option<[Complex64; N]> {
    let mut m = *a;
    let mut v = *b;
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))?;
        if m[piv][col].norm() == 0.0 {
            return None;
        }
        m.swap(col, piv);
        v.swap(col, piv);
        for row in col + 1..N {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (dst, src) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            let t = v[col];
            v[row] -= f * t;
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); N];
    for row in (0..N).rev() {
        let mut s = v[row];
        for k in row + 1..N {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

fn norm1<const N: usize>(a: &[[Complex64; N]; N]) -> f64 {
    (0..N)
        .map(|j| (0..N).map(|i| a[i][j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solve `a x = b` after row/column equilibration. The entries of the
/// optomechanical system span tens of orders of magnitude, so the condition
/// number is only meaningful for the rescaled matrix.
pub(crate) fn solve3_equilibrated(a: &[[Complex64; 3]; 3], b: &[Complex64; 3]) -> Option<Solved3> {
    let mut row = [1.0f64; 3];
    let mut col = [1.0f64; 3];
    for _ in 0..3 {
        for i in 0..3 {
            let m = (0..3)
                .map(|j| (a[i][j] * row[i] * col[j]).norm())
                .fold(0.0, f64::max);
            if m > 0.0 {
                row[i] /= m;
            }
        }
        for j in 0..3 {
            let m = (0..3)
                .map(|i| (a[i][j] * row[i] * col[j]).norm())
                .fold(0.0, f64::max);
            if m > 0.0 {
                col[j] /= m;
            }
        }
    }
    let mut s = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = a[i][j] * row[i] * col[j];
        }
    }
    let rhs = [b[0] * row[0], b[1] * row[1], b[2] * row[2]];
    let y = lu_solve(&s, &rhs)?;

    let mut inv = [[Complex64::new(0.0, 0.0); 3]; 3];
    for j in 0..3 {
        let mut e = [Complex64::new(0.0, 0.0); 3];
        e[j] = Complex64::new(1.0, 0.0);
        let c = lu_solve(&s, &e)?;
        for i in 0..3 {
            inv[i][j] = c[i];
        }
    }
    let condition = norm1(&s) * norm1(&inv);
    Some(Solved3 {
        x: [y[0] * col[0], y[1] * col[1], y[2] * col[2]],
        condition,
    })
}

/// Solve a real symmetric 3×3 system; `None` when singular.
pub(crate) fn solve3_real(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let ac = a.map(|r| r.map(c));
    let bc = b.map(c);
    let x = lu_solve(&ac, &bc)?;
    let out = x.map(|z| z.re);
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Inverse of a real 3×3 matrix; `None` when singular.
pub(crate) fn inverse3_real(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut inv = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        let c = solve3_real(a, &e)?;
        for i in 0..3 {
            inv[i][j] = c[i];
        }
    }
    Some(inv)
}
