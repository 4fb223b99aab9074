//! Linear multi-path interferometers built from 2×2 beam splitters.
//!
//! A network is a directed acyclic graph of sources, beam splitters and
//! detectors. Edges may carry a dispersive element. Besides the path
//! bookkeeping used to certify dispersion cancellation, the module evaluates
//! multi-photon detection probabilities for up to three independent photons
//! with frequency-integrating detectors:
//!
//! ```text
//! P(d_1..d_N) = 1/Π m_d! ∫ dω_1..dω_N |Σ_σ Π_k g_{d_k,σ(k)}(ω_k)|²
//! g_{d,j}(ω) = T_{d,j}(ω)·φ_j(ω)·e^{iωt_j}
//! ```
//!
//! where T_{d,j} sums the beam-splitter coefficient products times
//! e^{-½iβLω²} over all paths from source j to detector d, and m_d counts
//! photons in detector d.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{gvd_phase, DispersiveElement};
use crate::schmidt::HeraldedState;
use crate::spectral::SpectralFunction;
use crate::{Error, Result};

/// Default tolerance of [`check_cancellation`], fs².
pub const DEFAULT_CANCELLATION_TOLERANCE: f64 = 1e-6;

const MAX_PHOTONS: usize = 3;
const MAX_MIXED_RANK: usize = 3;
const UNITARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceNode {
    pub id: String,
    /// Emission delay in fs.
    pub delay_fs: f64,
}

/// 2×2 beam splitter. `unitary[out][in]` holds `[re, im]` pairs; without it
/// the splitter is the symmetric 50/50 [[1, 1], [1, −1]]/√2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSplitterNode {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<[[[f64; 2]; 2]; 2]>,
}

impl BeamSplitterNode {
    pub fn balanced(id: &str) -> Self {
        Self {
            id: id.to_string(),
            unitary: None,
        }
    }

    fn matrix(&self) -> [[Complex64; 2]; 2] {
        match self.unitary {
            Some(u) => u.map(|row| row.map(|[re, im]| Complex64::new(re, im))),
            None => {
                let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [[h, h], [h, -h]]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorNode {
    pub id: String,
}

/// Connection from an output (`source`, `bs:port`) to an input (`bs:port`,
/// `detector`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<DispersiveElement>,
}

impl Edge {
    pub fn new(from: &str, to: &str, dispersion: Option<DispersiveElement>) -> Self {
        Self {
            from: from.to_string(),
            to: to.to_string(),
            dispersion,
        }
    }

    fn beta_l(&self) -> f64 {
        self.dispersion.map_or(0.0, |d| d.beta_l())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub sources: Vec<SourceNode>,
    pub beam_splitters: Vec<BeamSplitterNode>,
    pub detectors: Vec<DetectorNode>,
    pub edges: Vec<Edge>,
}

/// Accumulated βL along one path from a source to a beam-splitter input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDispersion {
    pub source: String,
    pub beam_splitter: String,
    pub input_port: usize,
    /// fs²
    pub beta_l: f64,
}

/// Two photon paths meeting at a beam splitter with different βL.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub first: PathDispersion,
    pub second: PathDispersion,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub beam_splitter: String,
    pub pairs: Vec<Mismatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CancellationReport {
    pub satisfied: bool,
    pub violations: Vec<Violation>,
}

impl CancellationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    Source(usize),
    Splitter(usize),
    Detector(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Port {
    node: Node,
    port: usize,
}

/// One source→detector route with its coefficient product and total βL.
#[derive(Debug, Clone, Copy)]
struct Route {
    detector: usize,
    coefficient: Complex64,
    beta_l: f64,
}

/// Validated wiring: `next[output port] = (input port, βL on the edge)`.
struct Topology {
    next: HashMap<Port, (Port, f64)>,
}

impl NetworkSpec {
    fn resolve(&self, endpoint: &str, ids: &HashMap<&str, Node>, output: bool) -> Result<Port> {
        let (name, port) = match endpoint.split_once(':') {
            Some((name, p)) => {
                let port = p.parse::<usize>().map_err(|_| {
                    Error::InvalidNetwork(format!("bad port in endpoint '{endpoint}'"))
                })?;
                (name, Some(port))
            }
            None => (endpoint, None),
        };
        let node = *ids
            .get(name)
            .ok_or_else(|| Error::InvalidNetwork(format!("unknown node '{name}'")))?;
        let port = match (node, port, output) {
            (Node::Source(_), None | Some(0), true) | (Node::Detector(_), None | Some(0), false) => 0,
            (Node::Splitter(_), Some(p), _) if p < 2 => p,
            (Node::Splitter(_), _, _) => {
                return Err(Error::InvalidNetwork(format!(
                    "beam splitter endpoint '{endpoint}' needs port 0 or 1"
                )))
            }
            (Node::Source(_), _, false) => {
                return Err(Error::InvalidNetwork(format!("source '{name}' has no input")))
            }
            (Node::Detector(_), _, true) => {
                return Err(Error::InvalidNetwork(format!("detector '{name}' has no output")))
            }
            _ => {
                return Err(Error::InvalidNetwork(format!(
                    "single-port node in '{endpoint}' only has port 0"
                )))
            }
        };
        Ok(Port { node, port })
    }

    fn topology(&self) -> Result<Topology> {
        let mut ids = HashMap::new();
        let named = self
            .sources
            .iter()
            .enumerate()
            .map(|(k, s)| (s.id.as_str(), Node::Source(k)))
            .chain(
                self.beam_splitters
                    .iter()
                    .enumerate()
                    .map(|(k, b)| (b.id.as_str(), Node::Splitter(k))),
            )
            .chain(
                self.detectors
                    .iter()
                    .enumerate()
                    .map(|(k, d)| (d.id.as_str(), Node::Detector(k))),
            );
        for (id, node) in named {
            if id.is_empty() || id.contains(':') {
                return Err(Error::InvalidNetwork(format!("invalid node id '{id}'")));
            }
            if ids.insert(id, node).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate node id '{id}'")));
            }
        }
        for s in &self.sources {
            if !s.delay_fs.is_finite() {
                return Err(Error::InvalidNetwork(format!("source '{}' delay is not finite", s.id)));
            }
        }
        for b in &self.beam_splitters {
            let u = b.matrix();
            for i in 0..2 {
                for j in 0..2 {
                    let dot: Complex64 = (0..2).map(|k| u[k][i].conj() * u[k][j]).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    if (dot - target).norm() > UNITARITY_TOLERANCE {
                        return Err(Error::InvalidNetwork(format!(
                            "beam splitter '{}' is not unitary",
                            b.id
                        )));
                    }
                }
            }
        }

        let mut next = HashMap::new();
        let mut fed = HashSet::new();
        for e in &self.edges {
            let from = self.resolve(&e.from, &ids, true)?;
            let to = self.resolve(&e.to, &ids, false)?;
            if let Some(d) = e.dispersion {
                DispersiveElement::new(d.beta(), d.length()).map_err(|err| {
                    Error::InvalidNetwork(format!("edge {} -> {}: {err}", e.from, e.to))
                })?;
            }
            if next.insert(from, (to, e.beta_l())).is_some() {
                return Err(Error::InvalidNetwork(format!("output '{}' wired twice", e.from)));
            }
            if !fed.insert(to) {
                return Err(Error::InvalidNetwork(format!("input '{}' wired twice", e.to)));
            }
        }
        let outputs = (0..self.sources.len())
            .map(|k| Port {
                node: Node::Source(k),
                port: 0,
            })
            .chain((0..self.beam_splitters.len()).flat_map(|k| {
                (0..2).map(move |port| Port {
                    node: Node::Splitter(k),
                    port,
                })
            }));
        for out in outputs {
            if !next.contains_key(&out) {
                return Err(Error::InvalidNetwork(format!(
                    "output {} is not connected",
                    self.port_name(out)
                )));
            }
        }

        // Kahn's algorithm over beam splitters
        let n_bs = self.beam_splitters.len();
        let mut indegree = vec![0usize; n_bs];
        for (from, (to, _)) in &next {
            if let (Node::Splitter(_), Node::Splitter(b)) = (from.node, to.node) {
                indegree[b] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n_bs).filter(|&b| indegree[b] == 0).collect();
        let mut visited = 0;
        while let Some(b) = ready.pop() {
            visited += 1;
            for port in 0..2 {
                let out = Port {
                    node: Node::Splitter(b),
                    port,
                };
                if let Some((
                    Port {
                        node: Node::Splitter(c),
                        ..
                    },
                    _,
                )) = next.get(&out)
                {
                    indegree[*c] -= 1;
                    if indegree[*c] == 0 {
                        ready.push(*c);
                    }
                }
            }
        }
        if visited != n_bs {
            return Err(Error::InvalidNetwork("wiring contains a cycle".into()));
        }
        Ok(Topology { next })
    }

    fn port_name(&self, p: Port) -> String {
        match p.node {
            Node::Source(k) => self.sources[k].id.clone(),
            Node::Detector(k) => self.detectors[k].id.clone(),
            Node::Splitter(k) => format!("{}:{}", self.beam_splitters[k].id, p.port),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.topology().map(|_| ())
    }

    pub fn source_delays(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.delay_fs).collect()
    }

    /// Two cascaded balanced splitters A and B with three sources and three
    /// detectors. Sources s1, s2 enter A through `e1`, `e2`; A's output 1
    /// feeds B through `e12`; s3 enters B through `e3`. Detector d1 sits on
    /// A's output 0 and d2, d3 on B's outputs.
    pub fn cascaded_three_photon(
        e1: DispersiveElement,
        e2: DispersiveElement,
        e3: DispersiveElement,
        e12: DispersiveElement,
    ) -> Self {
        let source = |id: &str| SourceNode {
            id: id.to_string(),
            delay_fs: 0.0,
        };
        let detector = |id: &str| DetectorNode { id: id.to_string() };
        Self {
            sources: vec![source("s1"), source("s2"), source("s3")],
            beam_splitters: vec![BeamSplitterNode::balanced("A"), BeamSplitterNode::balanced("B")],
            detectors: vec![detector("d1"), detector("d2"), detector("d3")],
            edges: vec![
                Edge::new("s1", "A:0", Some(e1)),
                Edge::new("s2", "A:1", Some(e2)),
                Edge::new("A:0", "d1", None),
                Edge::new("A:1", "B:0", Some(e12)),
                Edge::new("s3", "B:1", Some(e3)),
                Edge::new("B:0", "d2", None),
                Edge::new("B:1", "d3", None),
            ],
        }
    }

    /// One balanced splitter, sources s1/s2 on its inputs and detectors d1/d2
    /// on its outputs.
    pub fn single_splitter(e1: DispersiveElement, e2: DispersiveElement) -> Self {
        Self {
            sources: vec![
                SourceNode {
                    id: "s1".into(),
                    delay_fs: 0.0,
                },
                SourceNode {
                    id: "s2".into(),
                    delay_fs: 0.0,
                },
            ],
            beam_splitters: vec![BeamSplitterNode::balanced("bs")],
            detectors: vec![DetectorNode { id: "d1".into() }, DetectorNode { id: "d2".into() }],
            edges: vec![
                Edge::new("s1", "bs:0", Some(e1)),
                Edge::new("s2", "bs:1", Some(e2)),
                Edge::new("bs:0", "d1", None),
                Edge::new("bs:1", "d2", None),
            ],
        }
    }

    /// Walks every path out of `source`, reporting each beam-splitter input
    /// reached and each detector route.
    fn walk(&self, topo: &Topology, source: usize) -> (Vec<PathDispersion>, Vec<Route>) {
        let mut arrivals = Vec::new();
        let mut routes = Vec::new();
        let mut stack = vec![(
            Port {
                node: Node::Source(source),
                port: 0,
            },
            Complex64::new(1.0, 0.0),
            0.0,
        )];
        while let Some((out, coefficient, beta_l)) = stack.pop() {
            let (to, edge_beta_l) = topo.next[&out];
            let beta_l = beta_l + edge_beta_l;
            match to.node {
                Node::Detector(d) => routes.push(Route {
                    detector: d,
                    coefficient,
                    beta_l,
                }),
                Node::Splitter(b) => {
                    arrivals.push(PathDispersion {
                        source: self.sources[source].id.clone(),
                        beam_splitter: self.beam_splitters[b].id.clone(),
                        input_port: to.port,
                        beta_l,
                    });
                    let u = self.beam_splitters[b].matrix();
                    for port in (0..2).rev() {
                        stack.push((
                            Port {
                                node: Node::Splitter(b),
                                port,
                            },
                            coefficient * u[port][to.port],
                            beta_l,
                        ));
                    }
                }
                Node::Source(_) => unreachable!("sources have no inputs"),
            }
        }
        (arrivals, routes)
    }
}

/// βL accumulated along every path from every source to every beam-splitter
/// input it can reach.
pub fn accumulated_dispersion(net: &NetworkSpec) -> Result<Vec<PathDispersion>> {
    let topo = net.topology()?;
    Ok((0..net.sources.len())
        .flat_map(|s| net.walk(&topo, s).0)
        .collect())
}

/// Checks that at every beam splitter all arriving photon paths carry equal βL
/// within `tolerance` fs².
pub fn check_cancellation(net: &NetworkSpec, tolerance: f64) -> Result<CancellationReport> {
    if !(tolerance >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be non-negative, got {tolerance}")));
    }
    let paths = accumulated_dispersion(net)?;
    let mut violations = Vec::new();
    for bs in &net.beam_splitters {
        let here: Vec<&PathDispersion> = paths.iter().filter(|p| p.beam_splitter == bs.id).collect();
        let mut pairs = Vec::new();
        for (i, a) in here.iter().enumerate() {
            for b in &here[i + 1..] {
                let difference = a.beta_l - b.beta_l;
                if difference.abs() > tolerance {
                    pairs.push(Mismatch {
                        first: (*a).clone(),
                        second: (*b).clone(),
                        difference,
                    });
                }
            }
        }
        if !pairs.is_empty() {
            violations.push(Violation {
                beam_splitter: bs.id.clone(),
                pairs,
            });
        }
    }
    Ok(CancellationReport {
        satisfied: violations.is_empty(),
        violations,
    })
}

/// Output modes g_{d,j}(ω) for each detector d and photon j.
fn output_modes(
    net: &NetworkSpec,
    modes: &[SpectralFunction],
    delays: &[f64],
) -> Result<Vec<Vec<Vec<Complex64>>>> {
    let topo = net.topology()?;
    if modes.len() != net.sources.len() || delays.len() != net.sources.len() {
        return Err(Error::invalid(format!(
            "network has {} sources but {} modes and {} delays were given",
            net.sources.len(),
            modes.len(),
            delays.len()
        )));
    }
    if modes.is_empty() || modes.len() > MAX_PHOTONS {
        return Err(Error::UnsupportedNetwork(format!(
            "{} photons; between 1 and {MAX_PHOTONS} are supported",
            modes.len()
        )));
    }
    let grid = modes[0].grid();
    if modes.iter().any(|m| !m.grid().is_compatible(grid)) {
        return Err(Error::IncompatibleGrid);
    }
    if delays.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("delays must be finite"));
    }
    let detunings = grid.detunings();
    let mut out = vec![vec![vec![Complex64::new(0.0, 0.0); detunings.len()]; modes.len()]; net.detectors.len()];
    for (j, (mode, &delay)) in modes.iter().zip(delays).enumerate() {
        for route in net.walk(&topo, j).1 {
            let g = &mut out[route.detector][j];
            for ((acc, &w), a) in g.iter_mut().zip(detunings).zip(mode.amplitudes()) {
                let phase = w * delay - gvd_phase(w, route.beta_l);
                *acc += route.coefficient * a * Complex64::from_polar(1.0, phase);
            }
        }
    }
    Ok(out)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut all = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            all.push(q);
        }
    }
    all.sort();
    all
}

/// Probability that the photons land in `detectors` (one entry per photon,
/// repeats allowed for bunched events). Parallel over the first frequency
/// index with an ordered final sum, so results are reproducible bit for bit.
fn outcome_probability(g: &[Vec<Vec<Complex64>>], detectors: &[usize], spacing: f64) -> f64 {
    let n_photons = detectors.len();
    let n = g[0][0].len();
    let perms = permutations(n_photons);
    let mut multiplicity = 1.0;
    let mut counts = BTreeMap::new();
    for d in detectors {
        *counts.entry(d).or_insert(0usize) += 1;
    }
    for m in counts.values() {
        multiplicity *= (1..=*m).product::<usize>() as f64;
    }
    let inner = n.pow(n_photons as u32 - 1);
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k0| {
            let mut idx = vec![k0; n_photons];
            let mut total = 0.0;
            for rest in 0..inner {
                let mut r = rest;
                for slot in idx.iter_mut().skip(1) {
                    *slot = r % n;
                    r /= n;
                }
                let amplitude: Complex64 = perms
                    .iter()
                    .map(|sigma| {
                        sigma
                            .iter()
                            .enumerate()
                            .map(|(k, &j)| g[detectors[k]][j][idx[k]])
                            .product::<Complex64>()
                    })
                    .sum();
                total += amplitude.norm_sqr();
            }
            total
        })
        .collect();
    partial.iter().sum::<f64>() * spacing.powi(n_photons as i32) / multiplicity
}

fn detector_indices(net: &NetworkSpec, outcome: &[&str]) -> Result<Vec<usize>> {
    outcome
        .iter()
        .map(|id| {
            net.detectors
                .iter()
                .position(|d| d.id == *id)
                .ok_or_else(|| Error::invalid(format!("unknown detector '{id}'")))
        })
        .collect()
}

/// Probability of the detection event `outcome` (one detector id per photon)
/// for independent pure photons `modes` emitted by the sources in order, with
/// emission delays `delays` in fs.
pub fn detection_probability(
    net: &NetworkSpec,
    modes: &[SpectralFunction],
    delays: &[f64],
    outcome: &[&str],
) -> Result<f64> {
    let g = output_modes(net, modes, delays)?;
    if outcome.len() != modes.len() {
        return Err(Error::invalid(format!(
            "outcome names {} detectors for {} photons",
            outcome.len(),
            modes.len()
        )));
    }
    let detectors = detector_indices(net, outcome)?;
    Ok(outcome_probability(&g, &detectors, modes[0].grid().spacing()))
}

/// Probabilities of every detection event, bunched ones included, keyed by
/// the sorted detector ids.
pub fn outcome_distribution(
    net: &NetworkSpec,
    modes: &[SpectralFunction],
    delays: &[f64],
) -> Result<Vec<(Vec<String>, f64)>> {
    let g = output_modes(net, modes, delays)?;
    let spacing = modes[0].grid().spacing();
    let n_det = net.detectors.len();
    let mut events = vec![Vec::new()];
    for _ in 0..modes.len() {
        events = events
            .into_iter()
            .flat_map(|e: Vec<usize>| {
                let start = e.last().copied().unwrap_or(0);
                (start..n_det).map(move |d| {
                    let mut f = e.clone();
                    f.push(d);
                    f
                })
            })
            .collect();
    }
    Ok(events
        .into_iter()
        .map(|e| {
            let names = e.iter().map(|&d| net.detectors[d].id.clone()).collect();
            (names, outcome_probability(&g, &e, spacing))
        })
        .collect())
}

fn require_three(net: &NetworkSpec) -> Result<()> {
    if net.sources.len() != 3 || net.detectors.len() != 3 {
        return Err(Error::UnsupportedNetwork(format!(
            "three-photon coincidences need 3 sources and 3 detectors, found {} and {}",
            net.sources.len(),
            net.detectors.len()
        )));
    }
    Ok(())
}

/// Probability of one photon in each of the three detectors for three
/// independent pure photons.
pub fn three_photon_coincidence(
    net: &NetworkSpec,
    modes: &[SpectralFunction; 3],
    delays: [f64; 3],
) -> Result<f64> {
    require_three(net)?;
    let ids: Vec<&str> = net.detectors.iter().map(|d| d.id.as_str()).collect();
    detection_probability(net, modes, &delays, &ids)
}

/// Experimental: threefold coincidence for mixed photons as the convex sum
/// over Schmidt-mode triples, each state limited to rank 3.
pub fn three_photon_coincidence_mixed(
    net: &NetworkSpec,
    states: [&HeraldedState; 3],
    delays: [f64; 3],
) -> Result<f64> {
    require_three(net)?;
    if let Some(s) = states.iter().find(|s| s.rank() > MAX_MIXED_RANK) {
        return Err(Error::UnsupportedNetwork(format!(
            "mixed inputs limited to rank {MAX_MIXED_RANK}, got rank {}",
            s.rank()
        )));
    }
    let mut total = 0.0;
    for (w0, m0) in states[0].weights().iter().zip(states[0].modes()) {
        for (w1, m1) in states[1].weights().iter().zip(states[1].modes()) {
            for (w2, m2) in states[2].weights().iter().zip(states[2].modes()) {
                let modes = [m0.clone(), m1.clone(), m2.clone()];
                total += w0 * w1 * w2 * three_photon_coincidence(net, &modes, delays)?;
            }
        }
    }
    Ok(total)
}
