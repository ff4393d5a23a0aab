use hscm_core::gam::{AdditiveFit, TermShape};
use hscm_core::graph::NodeCounts;
use hscm_core::hscm::VariableModel;
use hscm_core::rng::Stream;
use hscm_core::simgen::Standardize;
use hscm_core::{
    estimate, generate, simulate, Dag, EstimateOptions, HierDataset, HscmModel, NodeId, NoiseFamily, SimConfig,
};

/// Z1 -> X1 -> X2 and Z1 -> X2 with linear mechanisms:
/// X1 = i1 + a Z1 + xi1[g] + e1, X2 = i2 + b X1 + c Z1 + xi2[g] + e2.
#[derive(Debug, Clone)]
pub struct LinearHscm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub i1: f64,
    pub i2: f64,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub s1: f64,
    pub s2: f64,
    /// Observed Z1, one value per group.
    pub z: Vec<f64>,
}

impl LinearHscm {
    pub fn example() -> Self {
        LinearHscm {
            a: 1.5,
            b: -0.8,
            c: 0.6,
            i1: 0.3,
            i2: -1.0,
            xi1: vec![0.7, -0.4],
            xi2: vec![-0.5, 1.2],
            s1: 0.9,
            s2: 0.5,
            z: vec![-1.1, 0.8],
        }
    }

    pub fn model(&self) -> HscmModel {
        let m = self.z.len();
        let counts = NodeCounts { z: 1, w: 0, x: 2, u: 0 };
        let (z, x1, x2) = (NodeId::z(0), NodeId::x(0), NodeId::x(1));
        let lin = |slope: f64| TermShape::Linear { center: 0.0, slope };
        let source = VariableModel {
            node: z,
            fit: AdditiveFit::from_parts(0.0, vec![], None, 1.0),
            deviations: vec![],
            noise_sd: 1.0,
        };
        let f1 = AdditiveFit::from_parts(
            self.i1,
            vec![(z, lin(self.a))],
            Some(self.xi1.clone()),
            self.s1 * self.s1,
        );
        let f2 = AdditiveFit::from_parts(
            self.i2,
            vec![(x1, lin(self.b)), (z, lin(self.c))],
            Some(self.xi2.clone()),
            self.s2 * self.s2,
        );
        assert_eq!(self.xi1.len(), m);
        HscmModel {
            counts,
            d_z: Some(Dag::empty(counts)),
            d_w: None,
            d_x: Dag::from_edges(counts, [(x1, x2)]).unwrap(),
            selection_group: 0,
            z_parents: vec![vec![z], vec![z]],
            selection_fits: vec![f1.clone(), f2.clone()],
            group_models: vec![source],
            unit_models: vec![
                VariableModel {
                    node: x1,
                    fit: f1,
                    deviations: vec![],
                    noise_sd: self.s1,
                },
                VariableModel {
                    node: x2,
                    fit: f2,
                    deviations: vec![],
                    noise_sd: self.s2,
                },
            ],
            options: EstimateOptions::default(),
        }
    }

    /// Observed data the simulation resamples from. Only `Z1` is a source.
    pub fn data(&self) -> HierDataset {
        let m = self.z.len();
        let group: Vec<usize> = (0..m * 3).map(|i| i / 3).collect();
        let x: Vec<f64> = (0..m * 3).map(|i| i as f64).collect();
        HierDataset::new(vec![self.z.clone()], None, vec![x.clone(), x], group, m).unwrap()
    }
}

/// Closed-form distribution of a simulated column. Within group `g`, each
/// (group, subgroup) slot has a mean drawn uniformly from `slot_means[g]`,
/// and every row adds independent N(0, `noise_var`) noise.
pub struct SlotMixture {
    pub slot_means: Vec<Vec<f64>>,
    pub noise_var: f64,
}

pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub mean_se: f64,
    pub var_se: f64,
}

impl SlotMixture {
    /// Mean and variance of the pooled table with `subgroups` slots per group
    /// and `replicates` rows per slot, plus Monte-Carlo standard errors of the
    /// sample mean and (delta-method) sample variance.
    pub fn moments(&self, subgroups: usize, replicates: usize) -> Moments {
        let m = self.slot_means.len() as f64;
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mean = self.slot_means.iter().map(|g| avg(g)).sum::<f64>() / m;
        let s2 = self.noise_var;
        let (ms, n) = (subgroups as f64, replicates as f64);
        let total = m * ms * n;
        let mut var = s2;
        let mut mean_var = 0.0;
        let mut var_var = 0.0;
        for g in &self.slot_means {
            let gm = avg(g);
            let within = g.iter().map(|u| (u - gm).powi(2)).sum::<f64>() / g.len() as f64;
            let d2: Vec<f64> = g.iter().map(|u| (u - mean).powi(2)).collect();
            let e_d2 = avg(&d2);
            let var_d2 = d2.iter().map(|v| (v - e_d2).powi(2)).sum::<f64>() / d2.len() as f64;
            var += e_d2 / m;
            mean_var += ms * (n * n * within + n * s2);
            var_var += ms * (n * n * var_d2 + 4.0 * n * s2 * e_d2 + 2.0 * n * s2 * s2);
        }
        Moments {
            mean,
            var,
            mean_se: mean_var.sqrt() / total,
            var_se: var_var.sqrt() / total,
        }
    }
}

fn sample_moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Oracle distributions of every variable downstream of the target.
pub fn downstream_oracles(h: &LinearHscm, target: NodeId, value: f64) -> Vec<(NodeId, SlotMixture)> {
    let m = h.z.len();
    if target == NodeId::x(0) {
        let x2 = (0..m)
            .map(|g| h.z.iter().map(|&z| h.i2 + h.b * value + h.c * z + h.xi2[g]).collect())
            .collect();
        vec![(
            NodeId::x(1),
            SlotMixture {
                slot_means: x2,
                noise_var: h.s2 * h.s2,
            },
        )]
    } else if target == NodeId::z(0) {
        let x1: Vec<f64> = (0..m).map(|g| h.i1 + h.a * value + h.xi1[g]).collect();
        let x2 = (0..m)
            .map(|g| vec![h.i2 + h.b * x1[g] + h.c * value + h.xi2[g]])
            .collect();
        vec![
            (
                NodeId::x(0),
                SlotMixture {
                    slot_means: x1.iter().map(|&v| vec![v]).collect(),
                    noise_var: h.s1 * h.s1,
                },
            ),
            (
                NodeId::x(1),
                SlotMixture {
                    slot_means: x2,
                    noise_var: h.b * h.b * h.s1 * h.s1 + h.s2 * h.s2,
                },
            ),
        ]
    } else {
        panic!("no oracle for {target}")
    }
}

/// Whether one seed reproduces the closed-form mean and variance of every
/// downstream variable, under do(X1 = 0) and do(Z1 = 1.3), within three
/// Monte-Carlo standard errors.
pub fn linear_oracle_passes(h: &LinearHscm, seed: u64, subgroups: usize, replicates: usize) -> bool {
    let model = h.model();
    let data = h.data();
    [(NodeId::x(0), 0.0), (NodeId::z(0), 1.3)]
        .iter()
        .all(|&(target, value)| {
            let r = simulate(&model, &data, Some((target, value)), subgroups, replicates, seed).unwrap();
            downstream_oracles(h, target, value).iter().all(|(node, mix)| {
                let want = mix.moments(subgroups, replicates);
                let (mean, var) = sample_moments(r.values(*node).unwrap());
                (mean - want.mean).abs() <= 3.0 * want.mean_se && (var - want.var).abs() <= 3.0 * want.var_se
            })
        })
}

/// A model estimated on small generated data, for structural properties.
pub fn small_fitted(seed: u64) -> (HscmModel, HierDataset) {
    let config = SimConfig {
        n: 40,
        m: 20,
        p: 4,
        q: 3,
        r: 1,
        noise: NoiseFamily::GaussianStd,
        group_specific: false,
        second_factor: false,
        standardize: Standardize::WithinGroup,
        seed,
    };
    let truth = generate(&config).unwrap();
    let model = estimate(&truth.data, &EstimateOptions::default()).unwrap();
    (model, truth.data)
}

/// Count of variables that are not descendants of a random target but whose
/// simulated values differ in any bit from the unintervened run.
pub fn nondescendant_mismatches(model: &HscmModel, data: &HierDataset, seed: u64) -> (usize, usize) {
    let mut s = Stream::new(seed, 77);
    let nodes = model.counts.nodes();
    let target = nodes[s.index(nodes.len())];
    let value = s.uniform_range(-2.0, 2.0);
    let base = simulate(model, data, None, 3, 4, seed).unwrap();
    let hit = simulate(model, data, Some((target, value)), 3, 4, seed).unwrap();
    let desc = model.full_dag().descendants(target);
    let mut checked = 0;
    let mut bad = 0;
    for node in nodes.into_iter().filter(|n| *n != target && !desc.contains(n)) {
        checked += 1;
        let same = base
            .values(node)
            .unwrap()
            .iter()
            .zip(hit.values(node).unwrap())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            bad += 1;
        }
    }
    (bad, checked)
}
