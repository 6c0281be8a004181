//! Gauss-Legendre quadrature rules and log-domain helpers.

/// Nodes and weights of the n-point Gauss-Legendre rule on [a, b].
///
/// Newton iteration on the Legendre polynomial; accurate to machine
/// precision for the orders used here (≤ 4096).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && b > a);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(z) and P'_n(z) by recurrence
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let xm = 0.5 * (b + a);
        let xl = 0.5 * (b - a);
        x[i] = xm - xl * z;
        x[n - 1 - i] = xm + xl * z;
        let wi = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// n-point Gauss-Legendre rule on the log axis of (u_min, u_max); returns
/// (u nodes, weights already including the du = u dv Jacobian).
pub fn gauss_legendre_log(n: usize, u_min: f64, u_max: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(u_min > 0.0 && u_max > u_min);
    let (v, wv) = gauss_legendre(n, u_min.ln(), u_max.ln());
    let u: Vec<f64> = v.iter().map(|&t| t.exp()).collect();
    let w: Vec<f64> = u.iter().zip(&wv).map(|(&ui, &wi)| ui * wi).collect();
    (u, w)
}
