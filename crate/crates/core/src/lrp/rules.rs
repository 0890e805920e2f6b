//! Closed-form relevance rules.
//!
//! Linear maps use the ε-rule, element-wise maps and norms pass relevance
//! through unchanged, softmax uses its first-order Taylor rule at the recorded
//! input, and products of `N` factors split relevance uniformly. Matrix
//! products such as `A·V` and `Q·Kᵀ` are the combination of a sum and a
//! two-factor product, which gives the `1 / (2·O + ε)` attention rule.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Default stabilizer for ε-rule denominators.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// `z + ε·sign(z)` with `sign(0) = +1`, so the denominator never crosses zero.
#[inline]
pub fn stabilize(z: f64, eps: f64) -> f64 {
    if z >= 0.0 {
        z + eps
    } else {
        z - eps
    }
}

fn shape_err(what: &str) -> Error {
    Error::Shape(what.to_string())
}

/// ε-rule for `z_j = Σ_i W_ji x_i + b_j`.
///
/// `weight` is indexed `[j, i]` (`[out × in]`); `z` must include the bias.
/// Returns `R_i = Σ_j W_ji x_i R_j / (z_j ± ε)`.
pub fn relevance_linear(
    weight: ArrayView2<f64>,
    x: ArrayView1<f64>,
    z: ArrayView1<f64>,
    r: ArrayView1<f64>,
    eps: f64,
) -> Result<Array1<f64>> {
    let (n_out, n_in) = weight.dim();
    if x.len() != n_in || z.len() != n_out || r.len() != n_out {
        return Err(shape_err("relevance_linear: weight, x, z, r disagree"));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let c = Zip::from(&r).and(&z).map_collect(|&r, &z| r / stabilize(z, eps));
    Ok(&x * &weight.t().dot(&c))
}

/// Identity rule for single-input element-wise operations and norms.
pub fn relevance_elementwise(r: ArrayView1<f64>) -> Array1<f64> {
    r.to_owned()
}

/// Taylor rule for `s = softmax(x)`: `R_i^in = x_i (R_i − s_i Σ_j R_j)`.
pub fn relevance_softmax(
    x: ArrayView1<f64>,
    s: ArrayView1<f64>,
    r: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if x.len() != s.len() || x.len() != r.len() {
        return Err(shape_err("relevance_softmax: x, s, r disagree"));
    }
    let total = r.sum();
    Ok(Zip::from(&x)
        .and(&s)
        .and(&r)
        .map_collect(|&x, &s, &r| x * (r - s * total)))
}

/// Uniform rule for an `N`-factor product: every factor receives `R / N`.
pub fn relevance_bilinear_uniform(factors: usize, r: f64) -> Result<Vec<f64>> {
    if factors < 2 {
        return Err(Error::InvalidArgument(format!(
            "a product needs at least 2 factors, got {factors}"
        )));
    }
    Ok(vec![r / factors as f64; factors])
}

/// Attention rule for `O = A·V`.
///
/// Returns `(R_A, R_V)` with
/// `R_A[j,i] = Σ_p A_ji V_ip R_jp / (2 O_jp ± ε)` and
/// `R_V[i,p] = Σ_j A_ji V_ip R_jp / (2 O_jp ± ε)`.
pub fn relevance_attention_av(
    a: ArrayView2<f64>,
    v: ArrayView2<f64>,
    o: ArrayView2<f64>,
    r: ArrayView2<f64>,
    eps: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (ra, rv, _) = matmul_rule(a, v, o, r, eps)?;
    Ok((ra, rv))
}

/// Attention rule for a general product `O = A·B`, also reporting the
/// relevance absorbed by the stabilizer.
pub(crate) fn matmul_rule(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    o: ArrayView2<f64>,
    r: ArrayView2<f64>,
    eps: f64,
) -> Result<(Array2<f64>, Array2<f64>, f64)> {
    let (n, k) = a.dim();
    let (k2, p) = b.dim();
    if k != k2 || o.dim() != (n, p) || r.dim() != (n, p) {
        return Err(shape_err("attention rule: A, V, O, R disagree"));
    }
    let mut absorbed = 0.0;
    let c = Zip::from(&r).and(&o).map_collect(|&r, &o| {
        let den = stabilize(2.0 * o, eps);
        r / den
    });
    Zip::from(&c).and(&o).for_each(|&c, &o| {
        absorbed += c * (stabilize(2.0 * o, eps) - 2.0 * o);
    });
    let ra = &a * &c.dot(&b.t());
    let rb = &b * &a.t().dot(&c);
    Ok((ra, rb, absorbed))
}

/// Row-batched ε-rule for `Z = X·W + b` with `W` stored `[in × out]`.
/// Returns `(R_in, ε-absorbed, bias-absorbed)`.
pub(crate) fn linear_rows(
    x: ArrayView2<f64>,
    w: ArrayView2<f64>,
    bias: Option<ArrayView1<f64>>,
    z: ArrayView2<f64>,
    r: ArrayView2<f64>,
    eps: f64,
) -> (Array2<f64>, f64, f64) {
    let c = Zip::from(&r).and(&z).map_collect(|&r, &z| r / stabilize(z, eps));
    let mut eps_abs = 0.0;
    Zip::from(&c).and(&z).for_each(|&c, &z| eps_abs += c * (stabilize(z, eps) - z));
    let bias_abs = bias.map_or(0.0, |b| {
        c.rows().into_iter().map(|row| row.dot(&b)).sum()
    });
    (&x * &c.dot(&w.t()), eps_abs, bias_abs)
}

/// ε-rule split of `z = a + b` between its two summands.
pub(crate) fn residual_split(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    z: ArrayView2<f64>,
    r: ArrayView2<f64>,
    eps: f64,
) -> (Array2<f64>, Array2<f64>, f64) {
    let c = Zip::from(&r).and(&z).map_collect(|&r, &z| r / stabilize(z, eps));
    let mut eps_abs = 0.0;
    Zip::from(&c).and(&z).for_each(|&c, &z| eps_abs += c * (stabilize(z, eps) - z));
    (&a * &c, &b * &c, eps_abs)
}
