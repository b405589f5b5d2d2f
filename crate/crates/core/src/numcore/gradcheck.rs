use super::{NumError, ParamStore, Tape, Var};

/// How the numeric derivative is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difference {
    /// One central difference with step `eps`.
    Central,
    /// Ridders' extrapolation of central differences, keeping the estimate
    /// with the smallest internal error estimate. The starting step is `eps`,
    /// divided by 10 until no ReLU input changes sign between `x` and `x ± h`.
    Ridders,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    pub tol: f64,
    pub method: Difference,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-2,
            tol: 1e-4,
            method: Difference::Ridders,
        }
    }
}

impl GradCheckOptions {
    pub fn central(eps: f64) -> Self {
        Self {
            eps,
            tol: 1e-4,
            method: Difference::Central,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    /// Analytic and numeric gradient at the worst entry.
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tol: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_error < self.tol)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(move |p| p.max_rel_error >= self.tol)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn evaluate<F>(store: &ParamStore, build: &F) -> Result<(f64, Vec<i8>), NumError>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<Var, NumError>,
{
    let mut tape = Tape::new();
    let loss = build(store, &mut tape)?;
    Ok((tape.scalar(loss)?, tape.relu_pattern()))
}

/// Smallest starting step tried before giving up on staying off kinks.
const MIN_STEP: f64 = 1e-9;

/// Whether no ReLU input changed sign. Inputs that are exactly zero at the
/// base point are ignored: they are structural (padding, zero bias) far more
/// often than genuine kinks.
fn same_piece(base: &[i8], other: &[i8]) -> bool {
    base.len() == other.len() && base.iter().zip(other).all(|(&b, &o)| b == 0 || b == o)
}

/// Numeric derivative along one coordinate; `at(x)` evaluates the loss with
/// the coordinate set to `x`.
fn derivative(
    x: f64,
    opts: &GradCheckOptions,
    pattern: &[i8],
    at: &mut dyn FnMut(f64) -> Result<(f64, Vec<i8>), NumError>,
) -> Result<f64, NumError> {
    if opts.method == Difference::Central {
        return Ok((at(x + opts.eps)?.0 - at(x - opts.eps)?.0) / (2.0 * opts.eps));
    }
    let mut h = opts.eps;
    while h > MIN_STEP {
        let (_, plus) = at(x + h)?;
        let (_, minus) = at(x - h)?;
        if same_piece(pattern, &plus) && same_piece(pattern, &minus) {
            break;
        }
        h /= 10.0;
    }
    let mut central = |h: f64| -> Result<f64, NumError> { Ok((at(x + h)?.0 - at(x - h)?.0) / (2.0 * h)) };
    const SHRINK: f64 = 1.4;
    const SHRINK2: f64 = SHRINK * SHRINK;
    const STEPS: usize = 10;
    const SAFE: f64 = 2.0;
    let mut table = [[0.0f64; STEPS]; STEPS];
    table[0][0] = central(h)?;
    let mut best = table[0][0];
    let mut err = f64::INFINITY;
    for i in 1..STEPS {
        h /= SHRINK;
        table[0][i] = central(h)?;
        let mut fac = SHRINK2;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK2;
            let e = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= SAFE * err {
            break;
        }
    }
    Ok(best)
}

/// Compares reverse-mode gradients of `build` against finite differences
/// (see [`Difference`]) for every entry of every trainable parameter.
///
/// The closure must be deterministic; two forward passes that disagree are
/// reported as [`NumError::NonDeterministic`]. Parameter gradients in `store`
/// are overwritten with the analytic gradient.
pub fn grad_check<F>(store: &mut ParamStore, build: F, opts: GradCheckOptions) -> Result<GradCheckReport, NumError>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<Var, NumError>,
{
    let (first, pattern) = evaluate(store, &build)?;
    let (second, _) = evaluate(store, &build)?;
    if first.to_bits() != second.to_bits() {
        return Err(NumError::NonDeterministic { first, second });
    }

    store.zero_grads();
    let mut tape = Tape::new();
    let loss = build(store, &mut tape)?;
    tape.backward(loss, store)?;

    let ids: Vec<_> = store.ids().collect();
    let mut params = Vec::with_capacity(ids.len());
    for id in ids {
        if !store.get(id).trainable {
            continue;
        }
        let indices: Vec<usize> = store.get(id).free_indices().collect();
        let mut worst = (0.0, 0, 0.0, 0.0);
        for &i in &indices {
            let original = store.get(id).value.data()[i];
            let numeric = derivative(original, &opts, &pattern, &mut |x| {
                store.get_mut(id).value.data_mut()[i] = x;
                evaluate(store, &build)
            });
            store.get_mut(id).value.data_mut()[i] = original;
            let numeric = numeric?;
            let analytic = store.get(id).grad.data()[i];
            let err = relative_error(analytic, numeric);
            if err > worst.0 {
                worst = (err, i, analytic, numeric);
            }
        }
        params.push(ParamCheck {
            name: store.get(id).name.clone(),
            checked: indices.len(),
            max_rel_error: worst.0,
            worst_index: worst.1,
            worst_analytic: worst.2,
            worst_numeric: worst.3,
        });
    }
    Ok(GradCheckReport { tol: opts.tol, params })
}
