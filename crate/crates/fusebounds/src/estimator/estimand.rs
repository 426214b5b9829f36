//! Decomposable estimands: targets `E[h(Y,Z,X)]` with
//! `h(y,z,x) = f(y,x)' g(z,x)`.

use std::fmt;
use std::sync::Arc;

type PairFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// The pair `(f, g)` defining a decomposable target, plus its output
/// dimension `p_f` and a label for reports.
#[derive(Clone)]
pub struct DecomposableEstimand {
    name: String,
    p_f: usize,
    f: PairFn,
    g: PairFn,
}

impl fmt::Debug for DecomposableEstimand {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt.debug_struct("DecomposableEstimand")
            .field("name", &self.name)
            .field("p_f", &self.p_f)
            .finish()
    }
}

impl DecomposableEstimand {
    /// Register a user-defined pair. `f` maps `(y, x)` and `g` maps `(z, x)`
    /// to vectors of length `p_f`.
    pub fn from_fns<F, G>(name: impl Into<String>, p_f: usize, f: F, g: G) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        G: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { name: name.into(), p_f, f: Arc::new(f), g: Arc::new(g) }
    }

    /// Scalar product target `E[Y Z]`: `f = y`, `g = z`.
    pub fn product() -> Self {
        Self::from_fns("product", 1, |y, _| vec![y[0]], |z, _| vec![z[0]])
    }

    /// Relative-effect target `E[Y / Z]`: `f = y`, `g = 1/z`.
    ///
    /// Handling of `z` near zero is left to the data-generating process;
    /// oversized `g` values are rejected by the support check at evaluation.
    pub fn ratio() -> Self {
        Self::from_fns("ratio", 1, |y, _| vec![y[0]], |z, _| vec![1.0 / z[0]])
    }

    /// Joint-tail target `E[1{Y <= c_y} 1{Z <= c_z}]`.
    pub fn threshold_product(c_y: f64, c_z: f64) -> Self {
        Self::from_fns(
            format!("threshold-product(c_y={c_y}, c_z={c_z})"),
            1,
            move |y, _| vec![if y[0] <= c_y { 1.0 } else { 0.0 }],
            move |z, _| vec![if z[0] <= c_z { 1.0 } else { 0.0 }],
        )
    }

    /// Covariate-weighted product target `E[Y (a + b'X) Z]`:
    /// `f = y (a + b'x)`, `g = z`.
    pub fn linear_contrast(a: f64, b: Vec<f64>) -> Self {
        Self::from_fns(
            format!("linear-contrast(a={a}, b_len={})", b.len()),
            1,
            move |y, x| {
                let dot: f64 = b.iter().zip(x).map(|(bi, xi)| bi * xi).sum();
                vec![y[0] * (a + dot)]
            },
            |z, _| vec![z[0]],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn p_f(&self) -> usize {
        self.p_f
    }

    pub fn f(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        (self.f)(y, x)
    }

    pub fn g(&self, z: &[f64], x: &[f64]) -> Vec<f64> {
        (self.g)(z, x)
    }

    /// Scalar evaluation of `f`; valid only when `p_f == 1`.
    pub fn f_scalar(&self, y: &[f64], x: &[f64]) -> f64 {
        (self.f)(y, x)[0]
    }

    /// Scalar evaluation of `g`; valid only when `p_f == 1`.
    pub fn g_scalar(&self, z: &[f64], x: &[f64]) -> f64 {
        (self.g)(z, x)[0]
    }
}
