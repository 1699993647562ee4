use rayon::prelude::*;

use super::{aggregate, sample_clients, ClientUpload, FillRule, FlConfig, FlError, GridSchedule, RoundMetrics, Selector};
use crate::codec::{
    decode, encode, fixed_sparsify, optimal_sparsify, random_sparsify, solve_ratio, topk_sparsify, uplink_cost,
    CostModel, PayloadHeader, SparsePayload, SparseSet, SparsityPlan, SplineErrorMetric, WireShape,
};
use crate::data::{rmse, SplitDataset};
use crate::kan::{train_local, KanError, KanNetwork, ParamVector};
use crate::seed::{derive_indexed, derive_seed};

/// Server-side state carried between rounds.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub global: KanNetwork<f64>,
    pub schedule: GridSchedule,
}

struct ClientResult {
    upload: ClientUpload,
    train_loss: f64,
    fingerprint: u64,
}

fn select(
    cfg: &FlConfig,
    c: &[f64],
    k: usize,
    metric: Option<&SplineErrorMetric<f64>>,
    seed_path: [u64; 3],
) -> Result<SparseSet<f64>, FlError> {
    Ok(match cfg.selector {
        Selector::TopK => topk_sparsify(c, k)?,
        Selector::Fixed => fixed_sparsify(c, k)?,
        Selector::Random => random_sparsify(c, k, derive_indexed(derive_seed(cfg.seed, "select"), &seed_path))?,
        Selector::Optimal => optimal_sparsify(c, k, metric.expect("metrics built for the oracle"))?.set,
    })
}

/// Builds, encodes and decodes one sparse upload; returns the decoded update
/// densified over `reference`.
fn sparse_upload(
    cfg: &FlConfig,
    t: usize,
    client: usize,
    trained: &KanNetwork<f64>,
    reference: &ParamVector<f64>,
    plan: &SparsityPlan,
    metrics: &[SplineErrorMetric<f64>],
) -> Result<ClientUpload, FlError> {
    let params = trained.flatten();
    let layout = &params.layout;
    let n = layout.edge_len() - 1;
    let k = plan.retained_per_edge;
    let mut alphas = Vec::with_capacity(layout.edge_count());
    let mut sets = Vec::with_capacity(layout.edge_count());
    let mut e = 0u64;
    for (l, layer) in trained.layers().iter().enumerate() {
        for edge in layer.edges() {
            alphas.push(edge.base());
            sets.push(select(cfg, edge.coeffs(), k, metrics.get(l), [t as u64, client as u64, e])?);
            e += 1;
        }
    }
    let header = PayloadHeader {
        grid: plan.grid as u32,
        order: trained.order() as u32,
        retained: k as u32,
        round: t as u32,
        client: client as u32,
    };
    let payload = SparsePayload::new(header, cfg.bits_per_coeff, alphas, sets)?;
    let wire = encode(&payload)?;
    let shape = WireShape { bits_per_coeff: cfg.bits_per_coeff, edges: layout.edge_count() };
    let received: SparsePayload<f64> = decode(&wire.bytes, plan.grid, trained.order(), k, shape)?;

    let mut values = reference.values.clone();
    let mut sent = vec![false; values.len()];
    for (edge, (alpha, set)) in received.alphas().iter().zip(received.edges()).enumerate() {
        let start = edge * (n + 1);
        values[start] = *alpha;
        sent[start] = true;
        set.scatter_into(&mut values[start + 1..start + 1 + n]);
        for &p in set.indices() {
            sent[start + 1 + p] = true;
        }
    }
    Ok(ClientUpload { client, values: ParamVector::new(values, layout.clone())?, sent: Some(sent), bits: wire.body_bits() })
}

/// Runs round `t` and replaces the global model with the aggregate.
pub fn run_round(state: &mut ServerState, t: usize, cfg: &FlConfig, data: &SplitDataset) -> Result<RoundMetrics, FlError> {
    let grid = state.schedule.grid_size_at(t);
    let extended = grid != state.global.grid_size();
    let broadcast = &state.global;
    // The server extends the broadcast model exactly as clients do, to fill
    // coefficients a sparse upload leaves out.
    let reference_net = if extended { broadcast.extend_grid(grid)? } else { broadcast.clone() };
    let reference = reference_net.flatten();
    let expected = reference.layout.fingerprint();

    let cm = CostModel::for_layout(&reference.layout, cfg.bits_per_coeff)?;
    let dense_bits = uplink_cost(grid, &cm);
    let plan = match cfg.budget {
        Some(budget) if dense_bits > budget => Some(solve_ratio(grid, &cm, budget)?),
        _ => None,
    };
    let metrics: Vec<SplineErrorMetric<f64>> = if plan.is_some() && cfg.selector == Selector::Optimal {
        reference_net.layers().iter().map(|l| SplineErrorMetric::new(l.grid())).collect()
    } else {
        Vec::new()
    };

    let clients = sample_clients(t, cfg.num_clients, cfg.participation, cfg.seed);
    let results: Vec<ClientResult> = clients
        .par_iter()
        .map(|&k| -> Result<ClientResult, FlError> {
            let wrap = |source: KanError| FlError::Client { round: t, client: k, source };
            let local = if extended { broadcast.extend_grid(grid).map_err(wrap)? } else { broadcast.clone() };
            let fingerprint = local.layout().fingerprint();
            let out = train_local(&local, &data.clients[k], &cfg.client_train(t, k)).map_err(wrap)?;
            let train_loss = out.epoch_losses.last().copied().unwrap_or(f64::NAN);
            let upload = match &plan {
                Some(p) => sparse_upload(cfg, t, k, &out.network, &reference, p, &metrics)?,
                None => ClientUpload { client: k, values: out.network.flatten(), sent: None, bits: dense_bits },
            };
            Ok(ClientResult { upload, train_loss, fingerprint })
        })
        .collect::<Result<_, _>>()?;

    for r in &results {
        if r.fingerprint != expected {
            return Err(FlError::LayoutMismatch { expected, got: r.fingerprint });
        }
        if let (Some(budget), Some(_)) = (cfg.budget, &plan) {
            if r.upload.bits > budget {
                return Err(FlError::BudgetExceeded { round: t, bits: r.upload.bits, budget });
            }
        }
    }
    let uploads: Vec<ClientUpload> = results.iter().map(|r| r.upload.clone()).collect();
    let fill = if plan.is_some() { cfg.fill } else { FillRule::Broadcast };
    let merged = aggregate(&uploads, &reference, fill)?;
    state.global = KanNetwork::unflatten(&merged)?;

    let losses: Vec<f64> = results.iter().map(|r| r.train_loss).collect();
    Ok(RoundMetrics {
        round: t,
        grid,
        extended,
        clients,
        client_bits: uploads.iter().map(|u| u.bits).collect(),
        budget: cfg.budget,
        plan,
        rmse: rmse(&state.global, &data.test)?,
        train_loss: losses.iter().sum::<f64>() / losses.len() as f64,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub metrics: Vec<RoundMetrics>,
    pub final_model: KanNetwork<f64>,
}

/// Runs rounds `0..cfg.rounds` from `initial`, handing each round's metrics to `sink`.
pub fn run_experiment<F>(
    cfg: &FlConfig,
    schedule: &GridSchedule,
    data: &SplitDataset,
    initial: KanNetwork<f64>,
    mut sink: F,
) -> Result<ExperimentOutcome, FlError>
where
    F: FnMut(&RoundMetrics) -> std::io::Result<()>,
{
    cfg.validate()?;
    schedule.validate()?;
    if data.clients.len() != cfg.num_clients {
        return Err(FlError::InvalidConfig(format!(
            "{} client shards for num_clients = {}",
            data.clients.len(),
            cfg.num_clients
        )));
    }
    if initial.grid_size() != schedule.g0 {
        return Err(FlError::InvalidConfig(format!("initial grid {} differs from g0 = {}", initial.grid_size(), schedule.g0)));
    }
    let mut state = ServerState { global: initial, schedule: schedule.clone() };
    let mut metrics = Vec::with_capacity(cfg.rounds);
    for t in 0..cfg.rounds {
        let m = run_round(&mut state, t, cfg, data)?;
        sink(&m)?;
        metrics.push(m);
    }
    Ok(ExperimentOutcome { metrics, final_model: state.global })
}
