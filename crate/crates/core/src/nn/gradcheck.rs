use super::{Graph, NodeId, ParamStore, Tensor};
use crate::error::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// Anything that builds a differentiable expression from parameters and
/// input leaves.
pub trait GradModule {
    fn forward(&self, g: &mut Graph, store: &ParamStore, inputs: &[NodeId]) -> Result<NodeId>;
}

impl<F> GradModule for F
where
    F: Fn(&mut Graph, &ParamStore, &[NodeId]) -> Result<NodeId>,
{
    fn forward(&self, g: &mut Graph, store: &ParamStore, inputs: &[NodeId]) -> Result<NodeId> {
        self(g, store, inputs)
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor: error is `|a - n| / max(|a|, |n|, floor)`.
    pub floor: f64,
    pub check_inputs: bool,
    /// Seed of the random projection that reduces a non-scalar output.
    pub seed: u64,
}

impl GradCheckOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self { step: 1e-5, tolerance, floor: 1e-3, check_inputs: true, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Location of the largest error, e.g. `param tsb.block0.weight[12]`.
    pub worst: String,
    pub entries: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} max rel err {:.3e} (tol {:.0e}) over {} entries, worst at {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.max_rel_error,
            self.tolerance,
            self.entries,
            self.worst
        )
    }
}

struct Objective<'a, M: GradModule> {
    module: &'a M,
    projection: Option<Tensor>,
}

impl<M: GradModule> Objective<'_, M> {
    fn build(&self, g: &mut Graph, store: &ParamStore, inputs: &[Tensor]) -> Result<(NodeId, Vec<NodeId>)> {
        let leaves: Vec<NodeId> = inputs.iter().map(|t| g.input(t.clone())).collect();
        let out = self.module.forward(g, store, &leaves)?;
        let scalar = match &self.projection {
            Some(r) => {
                let r = g.input(r.clone());
                let prod = g.mul(out, r)?;
                g.sum(prod)
            }
            None => out,
        };
        Ok((scalar, leaves))
    }

    fn eval(&self, store: &ParamStore, inputs: &[Tensor]) -> Result<f64> {
        let mut g = Graph::new();
        let (s, _) = self.build(&mut g, store, inputs)?;
        Ok(g.value(s).item())
    }
}

/// Compares back-propagated gradients with central finite differences for
/// every parameter entry (and every input entry if requested). Non-scalar
/// outputs are reduced with a fixed random projection first.
pub fn check_gradients<M: GradModule>(
    module: &M,
    store: &ParamStore,
    inputs: &[Tensor],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut probe = Graph::new();
    let leaves: Vec<NodeId> = inputs.iter().map(|t| probe.input(t.clone())).collect();
    let out = module.forward(&mut probe, store, &leaves)?;
    let out_shape = probe.value(out).shape();
    let projection = (out_shape != [1, 1]).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let data = (0..out_shape[0] * out_shape[1]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor::from_vec(out_shape[0], out_shape[1], data).expect("shape from output")
    });
    let objective = Objective { module, projection };

    let mut g = Graph::new();
    let (scalar, leaves) = objective.build(&mut g, store, inputs)?;
    let back = g.backward(scalar)?;
    let mut analytic = store.zeros_like();
    for (p, grad) in back.param_grads() {
        analytic.accumulate(p, grad);
    }

    let h = opts.step;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: "nothing checked".into(),
        entries: 0,
        tolerance: opts.tolerance,
    };
    let mut record = |a: f64, n: f64, loc: &dyn Fn() -> String| {
        let err = (a - n).abs() / a.abs().max(n.abs()).max(opts.floor);
        report.entries += 1;
        if err > report.max_rel_error || report.entries == 1 {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = loc();
        }
    };

    let mut perturbed = store.clone();
    for id in store.ids() {
        for i in 0..store.get(id).len() {
            let orig = store.get(id).data()[i];
            perturbed.get_mut(id).data_mut()[i] = orig + h;
            let up = objective.eval(&perturbed, inputs)?;
            perturbed.get_mut(id).data_mut()[i] = orig - h;
            let down = objective.eval(&perturbed, inputs)?;
            perturbed.get_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            record(analytic.get(id).data()[i], numeric, &|| format!("param {}[{i}]", store.name(id)));
        }
    }

    if opts.check_inputs {
        let mut shifted: Vec<Tensor> = inputs.to_vec();
        for (k, leaf) in leaves.iter().enumerate() {
            let zero = Tensor::zeros(inputs[k].rows(), inputs[k].cols());
            let grad = back.grad(*leaf).unwrap_or(&zero).clone();
            for i in 0..inputs[k].len() {
                let orig = inputs[k].data()[i];
                shifted[k].data_mut()[i] = orig + h;
                let up = objective.eval(store, &shifted)?;
                shifted[k].data_mut()[i] = orig - h;
                let down = objective.eval(store, &shifted)?;
                shifted[k].data_mut()[i] = orig;
                record(grad.data()[i], (up - down) / (2.0 * h), &|| format!("input {k}[{i}]"));
            }
        }
    }
    Ok(report)
}
