//! Design-time explanations: the declared ontology, minicolumn
//! differentiation, expert-ranking fidelity, the plasticity-threshold sweep
//! and the temporal scope of spiking models.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::NetworkConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::explain::global::feature_usage;
use crate::learning::{accuracy, train, TrainOptions};
use crate::network::Model;
use crate::par::Execution;
use crate::stats::{median, spearman};

pub const ONTOLOGY_FORMAT: &str = "bcpnn-ontology/1";
/// Creation stamp used when the caller supplies none, so emission stays
/// reproducible.
pub const DEFAULT_CREATED: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeEntry {
    pub name: String,
    pub size: usize,
    pub states: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalScope {
    pub dt_ms: f64,
    pub tau_z_pre_ms: f64,
    pub tau_z_post_ms: f64,
    /// Age at which a spike's weight in the z-trace falls below `e^-3`.
    pub memory_window_ms: f64,
    pub statement: String,
}

pub fn temporal_scope(config: &NetworkConfig) -> Option<TemporalScope> {
    let s = config.spiking.as_ref()?;
    let tau = s.tau_z_pre_ms.max(s.tau_z_post_ms);
    let window = 3.0 * tau;
    Some(TemporalScope {
        dt_ms: s.dt_ms,
        tau_z_pre_ms: s.tau_z_pre_ms,
        tau_z_post_ms: s.tau_z_post_ms,
        memory_window_ms: window,
        statement: format!(
            "Spikes older than {window} ms carry less than 5% of the weight of a current spike; \
             the model does not associate events further apart than about {window} ms."
        ),
    })
}

/// The declared ontology, stamped with a SHA-256 digest of its content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OntologyDocument {
    pub format: String,
    pub purpose: String,
    pub created: String,
    pub attributes: Vec<AttributeEntry>,
    pub hidden: Vec<AttributeEntry>,
    pub connectivity: Vec<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub temporal_scope: Option<TemporalScope>,
    pub config: NetworkConfig,
    pub digest: String,
}

impl OntologyDocument {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Digest of every field except the digest itself.
    pub fn content_digest(&self) -> Result<String> {
        let mut doc = self.clone();
        doc.digest.clear();
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&doc)?)))
    }
}

fn entries(hcs: &[crate::config::HypercolumnSpec]) -> Vec<AttributeEntry> {
    hcs.iter()
        .map(|hc| AttributeEntry {
            name: hc.name.clone(),
            size: hc.size,
            states: (0..hc.size).map(|m| hc.state_label(m)).collect(),
        })
        .collect()
}

pub fn emit_ontology(config: &NetworkConfig, purpose: &str, created: &str) -> Result<OntologyDocument> {
    config.validate()?;
    let mut doc = OntologyDocument {
        format: ONTOLOGY_FORMAT.into(),
        purpose: purpose.into(),
        created: created.into(),
        attributes: entries(&config.input),
        hidden: entries(&config.hidden),
        connectivity: config.prior_mask().to_rows(),
        temporal_scope: temporal_scope(config),
        config: config.clone(),
        digest: String::new(),
    };
    doc.digest = doc.content_digest()?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyScore {
    /// `Diff_j`, nats per weight.
    pub per_hypercolumn: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    /// Fraction of the median below which a hypercolumn is flagged.
    pub warn_fraction: f64,
    pub flagged: Vec<usize>,
}

/// `Diff_j = 1/(M_j (M_j - 1)) sum_{k != k'} ||w_.jk - w_.jk'||_1` over the
/// active incoming weights of hidden hypercolumn `j`.
pub fn differentiation(model: &Model, j: usize) -> f64 {
    let li = model.input_layout();
    let lh = model.hidden_layout();
    let w = model.weights();
    let rows: Vec<usize> = (0..li.hypercolumns())
        .filter(|&i| w.mask().get(i, j))
        .flat_map(|i| li.range(i))
        .collect();
    let m = lh.size(j);
    let mut total = 0.0;
    for k in 0..m {
        for k2 in 0..m {
            if k != k2 {
                let (b, b2) = (lh.unit(j, k), lh.unit(j, k2));
                total += rows.iter().map(|&a| (w.raw(a, b) - w.raw(a, b2)).abs()).sum::<f64>();
            }
        }
    }
    total / (m * (m - 1)) as f64
}

pub fn efficiency(model: &Model, warn_fraction: f64) -> EfficiencyScore {
    let per: Vec<f64> = (0..model.hidden_layout().hypercolumns())
        .map(|j| differentiation(model, j))
        .collect();
    let med = median(&per);
    let flagged = per
        .iter()
        .enumerate()
        .filter(|(_, &d)| d < warn_fraction * med)
        .map(|(j, _)| j)
        .collect();
    EfficiencyScore {
        mean: per.iter().sum::<f64>() / per.len() as f64,
        median: med,
        per_hypercolumn: per,
        warn_fraction,
        flagged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityScore {
    /// Spearman correlation between expert and usage rankings.
    pub cf: f64,
    /// Attributes, most important first, as supplied.
    pub expert_ranking: Vec<String>,
    /// The same attributes ordered by summed usage, highest first.
    pub usage_ranking: Vec<String>,
    pub usage: Vec<f64>,
    pub tie_handling: &'static str,
    pub aggregation: &'static str,
}

/// Rank agreement between an expert's importance ordering (most important
/// first, exact attribute labels) and the model's per-attribute usage.
pub fn fidelity(expert: &[String], model: &Model) -> Result<FidelityScore> {
    let names: Vec<&str> = model.config().input.iter().map(|h| h.name.as_str()).collect();
    let mut idx = Vec::with_capacity(expert.len());
    for label in expert {
        let i = names
            .iter()
            .position(|n| n == label)
            .ok_or_else(|| Error::data(format!("expert ranking names unknown attribute '{label}'")))?;
        if idx.contains(&i) {
            return Err(Error::data(format!("expert ranking lists '{label}' twice")));
        }
        idx.push(i);
    }
    if idx.len() < 2 {
        return Err(Error::data("expert ranking needs at least two attributes"));
    }
    let all = feature_usage(model)?;
    let usage: Vec<f64> = idx.iter().map(|&i| all[i]).collect();
    let n = idx.len();
    let expert_score: Vec<f64> = (0..n).map(|p| (n - p) as f64).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| usage[b].total_cmp(&usage[a]));
    Ok(FidelityScore {
        cf: spearman(&expert_score, &usage),
        expert_ranking: expert.to_vec(),
        usage_ranking: order.iter().map(|&p| expert[p].clone()).collect(),
        usage,
        tie_handling: "average ranks",
        aggregation: "sum of usage over active connections of each attribute",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoPoint {
    #[serde(with = "crate::config::extended_f64")]
    pub rho: f64,
    pub seed: u64,
    /// Held-out accuracy (every fifth sample).
    pub accuracy: f64,
    pub active_connections: usize,
    /// Mean number of active incoming connections per hidden hypercolumn.
    pub graph_size: f64,
    pub swaps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoCurve {
    pub points: Vec<ParetoPoint>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    /// Active-connection count non-increasing in rho for every seed.
    pub monotone: bool,
}

impl ParetoCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,seed,accuracy,active_connections,graph_size,swaps\n");
        for p in &self.points {
            let rho = if p.rho.is_infinite() { "inf".to_string() } else { format!("{}", p.rho) };
            out.push_str(&format!(
                "{rho},{},{:.6},{},{:.6},{}\n",
                p.seed, p.accuracy, p.active_connections, p.graph_size, p.swaps
            ));
        }
        out
    }
}

/// Train one model per `(rho, seed)` cell; cells run independently.
pub fn rho_sweep(
    config: &NetworkConfig,
    data: &Dataset,
    grid: &[f64],
    seeds: &[u64],
    opts: &TrainOptions,
    exec: Execution,
) -> Result<ParetoCurve> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::argument("sweep needs at least one rho and one seed"));
    }
    data.check(config)?;
    let (train_rows, test_rows) = data.holdout_split();
    let train_set = data.subset(&train_rows);
    let cells: Vec<(f64, u64)> = grid.iter().flat_map(|&r| seeds.iter().map(move |&s| (r, s))).collect();
    let points = exec.try_map(cells.len(), |c| -> Result<ParetoPoint> {
        let (rho, seed) = cells[c];
        let cfg = config.clone().with_plasticity_threshold(rho);
        let mut model = Model::new(cfg)?;
        let o = TrainOptions { seed, ..opts.clone() };
        let outcome = train(&mut model, &train_set, &o)?;
        let mask = model.traces().mask();
        Ok(ParetoPoint {
            rho,
            seed,
            accuracy: accuracy(&model, data, &test_rows)?,
            active_connections: mask.count(),
            graph_size: mask.count() as f64 / mask.hiddens() as f64,
            swaps: outcome.events.len(),
        })
    })?;
    let monotone = seeds.iter().all(|&s| {
        let mut pts: Vec<&ParetoPoint> = points.iter().filter(|p| p.seed == s).collect();
        pts.sort_by(|a, b| a.rho.total_cmp(&b.rho));
        pts.windows(2).all(|w| w[1].active_connections <= w[0].active_connections)
    });
    Ok(ParetoCurve {
        points,
        seeds: seeds.to_vec(),
        epochs: opts.epochs,
        monotone,
    })
}
