//! Named parameter tensors with seed-deterministic initialization.
//!
//! Every tensor gets its own RNG stream derived from the config seed and the
//! parameter name, so initialization does not depend on creation order.

use std::collections::BTreeMap;

use autograd::{Arr, Graph, Var};
use ndarray::IxDyn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::{fnv1a64, VidError};

#[derive(Clone, Debug)]
pub struct ParamStore {
    tensors: BTreeMap<String, Arr>,
    fingerprint: u64,
}

fn normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream simple.
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

enum Init {
    /// Zero-mean normal with std sqrt(2 / fan_in).
    HeNormal { fan_in: usize },
    StdNormal,
    Zeros,
    Ones,
}

impl ParamStore {
    pub fn init(cfg: &ModelConfig) -> Result<ParamStore, VidError> {
        cfg.validate()?;
        let mut store = ParamStore {
            tensors: BTreeMap::new(),
            fingerprint: cfg.fingerprint(),
        };
        let seed = cfg.seed;
        let mut add = |name: &str, shape: &[usize], init: Init| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(name.as_bytes()));
            let n: usize = shape.iter().product();
            let data: Vec<f64> = match init {
                Init::HeNormal { fan_in } => {
                    let std = (2.0 / fan_in as f64).sqrt();
                    (0..n).map(|_| normal(&mut rng, std)).collect()
                }
                Init::StdNormal => (0..n).map(|_| normal(&mut rng, 1.0)).collect(),
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
            };
            store
                .tensors
                .insert(name.to_string(), Arr::from_shape_vec(IxDyn(shape), data).unwrap());
        };

        let d = cfg.embed_dim;
        let (nt, nh, nw) = cfg.grid();
        let p = nt * nh * nw;

        // Stem: kernel-3 convolution over the raw clip.
        add(
            "stem.conv.w",
            &[cfg.stem_width, cfg.channels, 3, 3, 3],
            Init::HeNormal { fan_in: cfg.channels * 27 },
        );
        add("stem.conv.b", &[cfg.stem_width], Init::Zeros);

        // Token embedding of flattened cubes, plus the positional table.
        add(
            "embed.lin.w",
            &[cfg.cube_len(), d],
            Init::HeNormal { fan_in: cfg.cube_len() },
        );
        add("embed.lin.b", &[d], Init::Zeros);
        add("embed.pos", &[p, d], Init::StdNormal);

        for k in 0..cfg.stages() {
            let c_in = cfg.stage_in_channels(k);
            let c_out = cfg.stage_widths[k];
            let pre = format!("stage{k}");
            for attn in ["s_attn", "t_attn"] {
                for proj in ["p1", "p2"] {
                    add(
                        &format!("{pre}.{attn}.{proj}.w"),
                        &[c_in, c_in, 1, 1, 1],
                        Init::HeNormal { fan_in: c_in },
                    );
                    add(&format!("{pre}.{attn}.{proj}.b"), &[c_in], Init::Zeros);
                }
            }
            add(
                &format!("{pre}.bs.reduce.w"),
                &[c_out, c_in, 1, 1, 1],
                Init::HeNormal { fan_in: c_in },
            );
            add(&format!("{pre}.bs.reduce.b"), &[c_out], Init::Zeros);
            add(
                &format!("{pre}.bs.conv.w"),
                &[c_out, c_out, 3, 3, 3],
                Init::HeNormal { fan_in: c_out * 27 },
            );
            add(&format!("{pre}.bs.conv.b"), &[c_out], Init::Zeros);
            add(&format!("{pre}.bs.gn.gamma"), &[c_out], Init::Ones);
            add(&format!("{pre}.bs.gn.beta"), &[c_out], Init::Zeros);

            // Transformer→conv bridge feeding this conv stage (from tokens of
            // the previous transformer stage), aligned to the stage input.
            // Zero-initialized: the injection starts as a no-op so the raw
            // pixel signal is not swamped by token features at init, and
            // grows as its weight gradient (g·tokensᵀ) is nonzero.
            add(&format!("{pre}.tc.proj.w"), &[c_in, d, 1, 1, 1], Init::Zeros);
            add(&format!("{pre}.tc.proj.b"), &[c_in], Init::Zeros);

            // Conv→transformer bridge feeding this transformer stage (from
            // conv features of the previous conv stage).
            add(
                &format!("{pre}.ct.lin.w"),
                &[c_in, d],
                Init::HeNormal { fan_in: c_in },
            );
            add(&format!("{pre}.ct.lin.b"), &[d], Init::Zeros);
            add(&format!("{pre}.ct.ln.gamma"), &[d], Init::Ones);
            add(&format!("{pre}.ct.ln.beta"), &[d], Init::Zeros);

            for ln in ["ln_s", "ln_t", "ln_ffn"] {
                add(&format!("{pre}.{ln}.gamma"), &[d], Init::Ones);
                add(&format!("{pre}.{ln}.beta"), &[d], Init::Zeros);
            }
            // Residual-branch output projections start at zero so every
            // token stage is the identity at init and deepens as it learns.
            for mhsa in ["s_mhsa", "t_mhsa"] {
                for proj in ["q", "k", "v"] {
                    add(
                        &format!("{pre}.{mhsa}.{proj}.w"),
                        &[d, d],
                        Init::HeNormal { fan_in: d },
                    );
                    add(&format!("{pre}.{mhsa}.{proj}.b"), &[d], Init::Zeros);
                }
                add(&format!("{pre}.{mhsa}.o.w"), &[d, d], Init::Zeros);
                add(&format!("{pre}.{mhsa}.o.b"), &[d], Init::Zeros);
            }
            add(
                &format!("{pre}.ffn.l1.w"),
                &[d, cfg.ffn_hidden],
                Init::HeNormal { fan_in: d },
            );
            add(&format!("{pre}.ffn.l1.b"), &[cfg.ffn_hidden], Init::Zeros);
            add(&format!("{pre}.ffn.l2.w"), &[cfg.ffn_hidden, d], Init::Zeros);
            add(&format!("{pre}.ffn.l2.b"), &[d], Init::Zeros);
        }

        // Waveform heads.
        let c_last = *cfg.stage_widths.last().unwrap();
        add(
            "head.conv.w",
            &[1, c_last, 1, 1, 1],
            Init::HeNormal { fan_in: c_last },
        );
        add("head.conv.b", &[1], Init::Zeros);
        add("head.token.proj.w", &[d, cfg.dr], Init::HeNormal { fan_in: d });
        add("head.token.proj.b", &[cfg.dr], Init::Zeros);
        add(
            "head.token.mlp.l1.w",
            &[p * cfg.dr, cfg.mlp_hidden],
            Init::HeNormal { fan_in: p * cfg.dr },
        );
        add("head.token.mlp.l1.b", &[cfg.mlp_hidden], Init::Zeros);
        add(
            "head.token.mlp.l2.w",
            &[cfg.mlp_hidden, cfg.frames],
            Init::HeNormal { fan_in: cfg.mlp_hidden },
        );
        add("head.token.mlp.l2.b", &[cfg.frames], Init::Zeros);

        Ok(store)
    }

    pub fn from_tensors(tensors: BTreeMap<String, Arr>, fingerprint: u64) -> ParamStore {
        ParamStore { tensors, fingerprint }
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn tensors(&self) -> &BTreeMap<String, Arr> {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut BTreeMap<String, Arr> {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Arr> {
        self.tensors.get(name)
    }

    /// Total number of scalar parameters.
    pub fn total_params(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    /// Materializes variables for one forward pass. With a graph the result
    /// is trainable (leaves); without, it is a set of constants.
    pub fn bind(&self, graph: Option<&Graph>) -> Bound {
        let vars = self
            .tensors
            .iter()
            .map(|(name, arr)| {
                let var = match graph {
                    Some(g) => g.var(arr.clone()),
                    None => Var::constant(arr.clone()),
                };
                (name.clone(), var)
            })
            .collect();
        Bound { vars, taken: Default::default() }
    }
}

/// One forward pass's view of the parameters. Modules `take` their tensors
/// by name exactly once; the full map stays available for gradient lookup
/// after the backward pass.
pub struct Bound {
    vars: BTreeMap<String, Var>,
    taken: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl Bound {
    pub fn take(&self, name: &str) -> Var {
        let mut taken = self.taken.borrow_mut();
        assert!(
            taken.insert(name.to_string()),
            "parameter `{name}` taken by two modules"
        );
        self.vars
            .get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` does not exist"))
            .clone()
    }

    pub fn var_map(&self) -> &BTreeMap<String, Var> {
        &self.vars
    }

    pub fn assert_consumed(&self) {
        let taken = self.taken.borrow();
        let leftovers: Vec<&String> =
            self.vars.keys().filter(|k| !taken.contains(*k)).collect();
        assert!(leftovers.is_empty(), "parameters owned by no module: {leftovers:?}");
    }
}
