const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

/// Minimise a unimodal `f` on `[a, b]` to a bracket no wider than `tol`.
pub fn golden_section_min(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> GoldenResult {
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evaluations += 1;
    }
    let (x, fx) = if fc < fd { (c, fc) } else { (d, fd) };
    GoldenResult { x, fx, evaluations }
}

pub fn golden_section_max(a: f64, b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> GoldenResult {
    let r = golden_section_min(a, b, tol, |x| -f(x));
    GoldenResult { fx: -r.fx, ..r }
}
