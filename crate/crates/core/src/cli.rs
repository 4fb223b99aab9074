//! Scenario files and the runner behind the `sim` binary.
//!
//! A scenario is a TOML document with a `mode` and the sections that mode
//! needs. Physics parameters have no implicit defaults; the runner writes
//! the fully resolved scenario next to its outputs as `manifest.toml`, which
//! can be run again as is.

use std::fmt::{Display, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dispersion::{apply_beta_l, broadened_duration, DispersiveElement};
use crate::hom::{
    fit_dip, prepare_source, scan, visibility_curve, visibility_curve_csv, PreparedSource,
    PurityMode, ScanConfig,
};
use crate::network::{
    accumulated_dispersion, check_cancellation, detection_probability, NetworkSpec,
};
use crate::schmidt::{purity, schmidt_number};
use crate::source::{jsi_csv, BandpassFilter, FilterConfig, GridConfig, SourceConfig};
use crate::spectral::{make_grid, SpectralFunction};
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    TwoPhotonScan,
    VisibilityCurve,
    NetworkCheck,
    NetworkSim,
    Broadening,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::TwoPhotonScan => "two-photon-scan",
            Mode::VisibilityCurve => "visibility-curve",
            Mode::NetworkCheck => "network-check",
            Mode::NetworkSim => "network-sim",
            Mode::Broadening => "broadening",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PuritySelection {
    Mixed,
    PostulatedPure,
    /// Both curves; visibility-curve mode only.
    Both,
}

impl PuritySelection {
    fn modes(self) -> Vec<PurityMode> {
        match self {
            PuritySelection::Mixed => vec![PurityMode::Mixed],
            PuritySelection::PostulatedPure => vec![PurityMode::PostulatedPure],
            PuritySelection::Both => vec![PurityMode::Mixed, PurityMode::PostulatedPure],
        }
    }
}

/// Fibers in the two arms: either fixed lengths `l1_mm`, `l2_mm`, or a sweep
/// of differences `delta_l_mm` with L₂ = L₁ − ΔL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    /// fs²/mm
    pub beta: f64,
    pub l1_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_l_mm: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Equality tolerance for accumulated βL, fs².
    pub tolerance_fs2: f64,
    pub topology: NetworkSpec,
}

/// Pure Gaussian photons for network-sim, one spectrum per source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonConfig {
    /// nm
    pub center_wavelength: f64,
    pub grid: GridConfig,
    /// Intensity spectra, written like bandpass filters.
    pub spectra: Vec<BandpassFilter>,
    /// One delay per source for each evaluation, fs.
    pub delays_fs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadeningConfig {
    pub bandwidth_fwhm_nm: f64,
    pub center_nm: f64,
    /// fs²/mm
    pub beta: f64,
    pub lengths_mm: Vec<f64>,
    /// Input pulse FWHM in fs; transform-limited when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_duration_fs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub gnuplot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purity_mode: Option<PuritySelection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
    /// Second SPDC source; a copy of `source` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source2: Option<SourceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<FilterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<DispersionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photons: Option<PhotonConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub broadening: Option<BroadeningConfig>,
    pub output: OutputConfig,
}

fn config(key: &str, err: impl Display) -> Error {
    let msg = err.to_string();
    let msg = msg.strip_prefix("invalid argument: ").unwrap_or(&msg);
    Error::Config(format!("{key}: {msg}"))
}

fn required<'a, T>(value: &'a Option<T>, key: &str, mode: Mode) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| config(key, format!("required by mode {}", mode.name())))
}

fn unused<T>(value: &Option<T>, key: &str, mode: Mode) -> Result<()> {
    match value {
        Some(_) => Err(config(key, format!("not used by mode {}", mode.name()))),
        None => Ok(()),
    }
}

fn non_negative(value: f64, key: &str) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(config(key, format!("must be a non-negative length, got {value}")))
    }
}

fn validate_source(src: &SourceConfig, key: &str) -> Result<()> {
    src.pump.validate().map_err(|e| config(&format!("{key}.pump"), e))?;
    src.phase_matching
        .validate()
        .map_err(|e| config(&format!("{key}.phase_matching"), e))?;
    src.truncation
        .validate()
        .map_err(|e| config(&format!("{key}.truncation"), e))?;
    src.make_grid().map_err(|e| config(&format!("{key}.grid"), e))?;
    Ok(())
}

impl Scenario {
    /// Checks that the sections present match the mode and that every value
    /// is in range. Errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let mode = self.mode;
        let spectral = matches!(mode, Mode::TwoPhotonScan | Mode::VisibilityCurve);
        if spectral {
            let src = required(&self.source, "source", mode)?;
            validate_source(src, "source")?;
            if let Some(s2) = &self.source2 {
                validate_source(s2, "source2")?;
                if s2.make_grid()? != src.make_grid()? {
                    return Err(config("source2.grid", "must match the grid of source"));
                }
            }
            let filters = required(&self.filters, "filters", mode)?;
            filters.signal.validate().map_err(|e| config("filters.signal", e))?;
            filters.idler.validate().map_err(|e| config("filters.idler", e))?;
            let purity_mode = *required(&self.purity_mode, "purity_mode", mode)?;
            let d = required(&self.dispersion, "dispersion", mode)?;
            if !d.beta.is_finite() {
                return Err(config("dispersion.beta", "must be finite"));
            }
            non_negative(d.l1_mm, "dispersion.l1_mm")?;
            if mode == Mode::TwoPhotonScan {
                if purity_mode == PuritySelection::Both {
                    return Err(config("purity_mode", "'both' needs mode visibility-curve"));
                }
                non_negative(*required(&d.l2_mm, "dispersion.l2_mm", mode)?, "dispersion.l2_mm")?;
                unused(&d.delta_l_mm, "dispersion.delta_l_mm", mode)?;
                if let Some(s) = &self.scan {
                    s.validate().map_err(|e| config("scan", e))?;
                }
            } else {
                let deltas = required(&d.delta_l_mm, "dispersion.delta_l_mm", mode)?;
                if deltas.is_empty() {
                    return Err(config("dispersion.delta_l_mm", "must not be empty"));
                }
                for dl in deltas {
                    if !dl.is_finite() || !(d.l1_mm - dl >= 0.0) {
                        return Err(config(
                            "dispersion.delta_l_mm",
                            format!("entry {dl} gives a negative second fiber length"),
                        ));
                    }
                }
                unused(&d.l2_mm, "dispersion.l2_mm", mode)?;
                unused(&self.scan, "scan", mode)?;
            }
        } else {
            unused(&self.source, "source", mode)?;
            unused(&self.source2, "source2", mode)?;
            unused(&self.filters, "filters", mode)?;
            unused(&self.dispersion, "dispersion", mode)?;
            unused(&self.scan, "scan", mode)?;
            unused(&self.purity_mode, "purity_mode", mode)?;
        }

        if matches!(mode, Mode::NetworkCheck | Mode::NetworkSim) {
            let net = required(&self.network, "network", mode)?;
            if !(net.tolerance_fs2 >= 0.0) {
                return Err(config("network.tolerance_fs2", "must be non-negative"));
            }
            net.topology.validate().map_err(|e| config("network.topology", e))?;
        } else {
            unused(&self.network, "network", mode)?;
        }

        if mode == Mode::NetworkSim {
            let p = required(&self.photons, "photons", mode)?;
            let n_sources = self.network.as_ref().map_or(0, |n| n.topology.sources.len());
            let n_detectors = self.network.as_ref().map_or(0, |n| n.topology.detectors.len());
            if n_detectors != n_sources {
                return Err(config(
                    "network.topology.detectors",
                    "network-sim counts one photon per detector; need as many detectors as sources",
                ));
            }
            if p.spectra.len() != n_sources {
                return Err(config(
                    "photons.spectra",
                    format!("{} spectra for {n_sources} sources", p.spectra.len()),
                ));
            }
            for (k, s) in p.spectra.iter().enumerate() {
                s.validate().map_err(|e| config(&format!("photons.spectra[{k}]"), e))?;
            }
            make_grid(
                p.center_wavelength,
                p.grid.reference_bandwidth_fwhm,
                p.grid.span_factor,
                p.grid.n_points,
            )
            .map_err(|e| config("photons.grid", e))?;
            if p.delays_fs.is_empty() {
                return Err(config("photons.delays_fs", "must not be empty"));
            }
            if let Some(t) = p.delays_fs.iter().find(|t| t.len() != n_sources) {
                return Err(config(
                    "photons.delays_fs",
                    format!("entry with {} delays for {n_sources} sources", t.len()),
                ));
            }
        } else {
            unused(&self.photons, "photons", mode)?;
        }

        if mode == Mode::Broadening {
            let b = required(&self.broadening, "broadening", mode)?;
            if !(b.bandwidth_fwhm_nm > 0.0) {
                return Err(config("broadening.bandwidth_fwhm_nm", "must be positive"));
            }
            if !(b.center_nm > 0.0) {
                return Err(config("broadening.center_nm", "must be positive"));
            }
            if !b.beta.is_finite() {
                return Err(config("broadening.beta", "must be finite"));
            }
            for l in &b.lengths_mm {
                non_negative(*l, "broadening.lengths_mm")?;
            }
            if let Some(t) = b.input_duration_fs {
                if !(t > 0.0) {
                    return Err(config("broadening.input_duration_fs", "must be positive"));
                }
            }
        } else {
            unused(&self.broadening, "broadening", mode)?;
        }
        Ok(())
    }

    /// Fills in the defaults chosen at run time, currently the delay scan.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        if self.mode == Mode::TwoPhotonScan && self.scan.is_none() {
            if let Some(d) = &self.dispersion {
                let delta = d.beta * (d.l1_mm - d.l2_mm.unwrap_or(d.l1_mm));
                out.scan = Some(ScanConfig::for_delta(delta));
            }
        }
        out
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }
}

/// Parses and validates scenario text; `origin` labels errors.
pub fn parse_scenario_str(text: &str, origin: &str) -> Result<Scenario> {
    let scenario: Scenario =
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    scenario
        .validate()
        .map_err(|e| Error::Config(format!("{origin}: {}", e.to_string().trim_start_matches("config error: "))))?;
    Ok(scenario)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::NotFound(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    parse_scenario_str(&text, &path.display().to_string())
}

/// Built-in scenarios: (name, description, TOML text).
pub const PRESETS: &[(&str, &str, &str)] = &[
    (
        "fig1c",
        "two-photon dip, 1 nm heralded / 10 nm heralding filters, no fiber",
        include_str!("../scenarios/fig1c.toml"),
    ),
    (
        "fig2a",
        "two-photon dip, 10 nm filters, 6 m fiber in both arms",
        include_str!("../scenarios/fig2a.toml"),
    ),
    (
        "fig2b",
        "two-photon dip, 10 nm filters, 28 m fiber in both arms",
        include_str!("../scenarios/fig2b.toml"),
    ),
    (
        "fig2c",
        "two-photon dip, 10 nm filters, 6 m vs 3.5 m fiber",
        include_str!("../scenarios/fig2c.toml"),
    ),
    (
        "fig3",
        "visibility and dip width vs fiber length difference, mixed and postulated-pure",
        include_str!("../scenarios/fig3.toml"),
    ),
    (
        "fig5-cond-i",
        "three-photon network, equal dispersion on all inputs, none between splitters",
        include_str!("../scenarios/fig5-cond-i.toml"),
    ),
    (
        "fig5-cond-ii",
        "three-photon network, third arm matching the first two plus the inter-splitter fiber",
        include_str!("../scenarios/fig5-cond-ii.toml"),
    ),
    (
        "fig5-sim",
        "three-photon coincidences through the cascaded network against a dispersion-free baseline",
        include_str!("../scenarios/fig5-sim.toml"),
    ),
    (
        "broadening-6m",
        "pulse broadening of a 10 nm photon in 6 m of fused silica",
        include_str!("../scenarios/broadening-6m.toml"),
    ),
    (
        "broadening-28m",
        "pulse broadening of a 10 nm photon in 28 m of fused silica",
        include_str!("../scenarios/broadening-28m.toml"),
    ),
];

pub fn preset(name: &str) -> Result<Scenario> {
    let (_, _, text) = PRESETS
        .iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            Error::Config(format!("unknown preset '{name}' (available: {})", names.join(", ")))
        })?;
    parse_scenario_str(text, &format!("preset {name}"))
}

/// Files written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs a validated scenario, writing into `out` (or the scenario's output
/// directory) and finishing with `manifest.toml`.
pub fn run(scenario: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    scenario.validate()?;
    let scenario = scenario.resolved();
    let dir = out.map_or_else(|| scenario.output.dir.clone(), Path::to_path_buf);
    let mut w = Writer::new(&dir)?;
    match scenario.mode {
        Mode::TwoPhotonScan => run_scan(&scenario, &mut w)?,
        Mode::VisibilityCurve => run_curve(&scenario, &mut w)?,
        Mode::NetworkCheck => run_network_check(&scenario, &mut w)?,
        Mode::NetworkSim => run_network_sim(&scenario, &mut w)?,
        Mode::Broadening => run_broadening(&scenario, &mut w)?,
    }
    if scenario.output.gnuplot {
        w.write("plot.gp", &gnuplot_script(scenario.mode, scenario.purity_mode))?;
    }
    let manifest = format!(
        "# resolved scenario written by dispcancel {}\n{}",
        env!("CARGO_PKG_VERSION"),
        scenario.to_toml()?
    );
    w.write("manifest.toml", &manifest)?;
    Ok(RunReport {
        dir,
        files: w.files,
    })
}

fn purity_mode(scenario: &Scenario) -> PurityMode {
    match scenario.purity_mode {
        Some(PuritySelection::PostulatedPure) => PurityMode::PostulatedPure,
        _ => PurityMode::Mixed,
    }
}

fn source_summary(p: &PreparedSource) -> serde_json::Value {
    serde_json::json!({
        "purity": purity(&p.state),
        "heralded_purity": purity(&crate::schmidt::herald(&p.decomposition)),
        "schmidt_number": schmidt_number(&p.decomposition),
        "schmidt_rank": p.decomposition.rank(),
        "discarded_mass": p.decomposition.discarded_mass(),
        "truncation_warning": p.decomposition.truncation_warning(),
    })
}

fn run_scan(s: &Scenario, w: &mut Writer) -> Result<()> {
    let src = s.source.as_ref().expect("validated");
    let filters = s.filters.as_ref().expect("validated");
    let d = s.dispersion.as_ref().expect("validated");
    let cfg = s.scan.expect("resolved");
    let mode = purity_mode(s);
    let first = prepare_source(src, filters, mode)?;
    let second = match &s.source2 {
        Some(src2) => Some(prepare_source(src2, filters, mode)?),
        None => None,
    };
    let state2 = second.as_ref().map_or(&first.state, |p| &p.state);
    let l2 = d.l2_mm.expect("validated");
    let arm1 = apply_beta_l(&first.state, DispersiveElement::new(d.beta, d.l1_mm)?.beta_l());
    let arm2 = apply_beta_l(state2, DispersiveElement::new(d.beta, l2)?.beta_l());
    let result = scan(&arm1, &arm2, None, &cfg)?;
    w.write("jsi.csv", &jsi_csv(&first.jsa))?;
    w.write("schmidt_eigenvalues.csv", &first.decomposition.eigenvalues_csv())?;
    w.write("scan.csv", &result.to_csv())?;
    let metrics = fit_dip(&result)?;
    let mut json = serde_json::to_value(metrics).expect("metrics serialize");
    json["delta_beta_l_fs2"] = serde_json::json!(d.beta * d.l1_mm - d.beta * l2);
    json["source"] = source_summary(&first);
    if let Some(p) = &second {
        json["source2"] = source_summary(p);
    }
    let mut text = serde_json::to_string_pretty(&json).expect("json");
    text.push('\n');
    w.write("metrics.json", &text)
}

fn run_curve(s: &Scenario, w: &mut Writer) -> Result<()> {
    let src = s.source.as_ref().expect("validated");
    let filters = s.filters.as_ref().expect("validated");
    let d = s.dispersion.as_ref().expect("validated");
    let deltas = d.delta_l_mm.as_ref().expect("validated");
    let first = prepare_source(src, filters, PurityMode::Mixed)?;
    w.write("jsi.csv", &jsi_csv(&first.jsa))?;
    w.write("schmidt_eigenvalues.csv", &first.decomposition.eigenvalues_csv())?;
    for mode in s.purity_mode.expect("validated").modes() {
        let points = visibility_curve(src, filters, d.beta, d.l1_mm, deltas, mode)?;
        let name = match mode {
            PurityMode::Mixed => "visibility_curve_mixed.csv",
            PurityMode::PostulatedPure => "visibility_curve_postulated_pure.csv",
        };
        w.write(name, &visibility_curve_csv(&points))?;
    }
    Ok(())
}

fn run_network_check(s: &Scenario, w: &mut Writer) -> Result<()> {
    let net = s.network.as_ref().expect("validated");
    let report = check_cancellation(&net.topology, net.tolerance_fs2)?;
    w.write("cancellation.json", &report.to_json())?;
    let mut csv = String::from("source,beam_splitter,input_port,beta_l_fs2\n");
    for p in accumulated_dispersion(&net.topology)? {
        let _ = writeln!(csv, "{},{},{},{}", p.source, p.beam_splitter, p.input_port, p.beta_l);
    }
    w.write("accumulated_dispersion.csv", &csv)
}

fn run_network_sim(s: &Scenario, w: &mut Writer) -> Result<()> {
    run_network_check(s, w)?;
    let net = &s.network.as_ref().expect("validated").topology;
    let photons = s.photons.as_ref().expect("validated");
    let grid = std::sync::Arc::new(make_grid(
        photons.center_wavelength,
        photons.grid.reference_bandwidth_fwhm,
        photons.grid.span_factor,
        photons.grid.n_points,
    )?);
    let modes = photons
        .spectra
        .iter()
        .map(|f| {
            SpectralFunction::from_fn(std::sync::Arc::clone(&grid), |x| {
                Complex64::new(f.amplitude_transmission(x, photons.center_wavelength), 0.0)
            })
            .normalized()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut baseline_net = net.clone();
    for e in &mut baseline_net.edges {
        e.dispersion = None;
    }
    let outcome: Vec<&str> = net.detectors.iter().map(|d| d.id.as_str()).collect();
    let mut csv = String::new();
    for k in 0..modes.len() {
        let _ = write!(csv, "t{}_fs,", k + 1);
    }
    csv.push_str("probability,baseline\n");
    for delays in &photons.delays_fs {
        let p = detection_probability(net, &modes, delays, &outcome)?;
        let b = detection_probability(&baseline_net, &modes, delays, &outcome)?;
        for t in delays {
            let _ = write!(csv, "{t},");
        }
        let _ = writeln!(csv, "{p},{b}");
    }
    w.write("network_coincidence.csv", &csv)
}

fn run_broadening(s: &Scenario, w: &mut Writer) -> Result<()> {
    let b = s.broadening.as_ref().expect("validated");
    let mut csv = String::from("length_mm,beta_l_fs2,duration_ps\n");
    for &l in &b.lengths_mm {
        let beta_l = DispersiveElement::new(b.beta, l)?.beta_l();
        let t = broadened_duration(b.bandwidth_fwhm_nm, b.center_nm, beta_l, b.input_duration_fs)?;
        let _ = writeln!(csv, "{l},{beta_l},{t}");
    }
    w.write("broadening.csv", &csv)
}

fn gnuplot_script(mode: Mode, purity: Option<PuritySelection>) -> String {
    let head = "set datafile separator ','\nset key autotitle columnhead\n";
    let body = match mode {
        Mode::TwoPhotonScan => "set xlabel 'delay (fs)'\nset ylabel 'coincidence probability'\n\
             plot 'scan.csv' using 1:2 with linespoints\n"
            .to_string(),
        Mode::VisibilityCurve => {
            let files: Vec<String> = purity
                .map(|p| p.modes())
                .unwrap_or_default()
                .into_iter()
                .map(|m| match m {
                    PurityMode::Mixed => "visibility_curve_mixed.csv",
                    PurityMode::PostulatedPure => "visibility_curve_postulated_pure.csv",
                })
                .map(|f| format!("'{f}' using 1:2 with linespoints"))
                .collect();
            format!(
                "set xlabel 'fiber length difference (mm)'\nset ylabel 'visibility'\nplot {}\n",
                files.join(", ")
            )
        }
        Mode::NetworkCheck => "set style data histograms\n\
             plot 'accumulated_dispersion.csv' using 4:xtic(2)\n"
            .to_string(),
        Mode::NetworkSim => "set ylabel 'threefold coincidence probability'\n\
             plot 'network_coincidence.csv' using 0:(column('probability')) with points, \
             '' using 0:(column('baseline')) with lines\n"
            .to_string(),
        Mode::Broadening => "set xlabel 'fiber length (mm)'\nset ylabel 'pulse FWHM (ps)'\n\
             plot 'broadening.csv' using 1:3 with linespoints\n"
            .to_string(),
    };
    format!("{head}{body}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_parse() {
        for (name, _, _) in PRESETS {
            let s = preset(name).unwrap();
            let again = parse_scenario_str(&s.to_toml().unwrap(), name).unwrap();
            assert_eq!(s, again, "{name}");
        }
    }

    #[test]
    fn fig2a_preset_contents() {
        let s = preset("fig2a").unwrap();
        assert_eq!(s.mode, Mode::TwoPhotonScan);
        let d = s.dispersion.unwrap();
        assert_eq!(d.beta, 37.802);
        assert_eq!((d.l1_mm, d.l2_mm), (6000.0, Some(6000.0)));
    }

    #[test]
    fn negative_length_names_key() {
        let text = PRESETS.iter().find(|p| p.0 == "fig2a").unwrap().2;
        let bad = text.replace("l1_mm = 6000.0", "l1_mm = -1.0");
        assert_ne!(bad, text);
        let err = parse_scenario_str(&bad, "bad").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("dispersion.l1_mm")), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = PRESETS.iter().find(|p| p.0 == "fig2a").unwrap().2;
        let bad = text.replace("l1_mm = 6000.0", "l1_mm = 6000.0\nfiber_colour = \"red\"");
        let err = parse_scenario_str(&bad, "bad").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("fiber_colour")), "{err}");
    }

    #[test]
    fn missing_physics_parameter_rejected() {
        let text = PRESETS.iter().find(|p| p.0 == "fig2a").unwrap().2;
        let bad: String = text
            .lines()
            .filter(|l| !l.starts_with("gvm_idler"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = parse_scenario_str(&bad, "bad").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("gvm_idler")), "{err}");
    }

    #[test]
    fn cond_ii_preset_is_satisfied() {
        let s = preset("fig5-cond-ii").unwrap();
        let net = s.network.unwrap();
        assert!(check_cancellation(&net.topology, net.tolerance_fs2).unwrap().satisfied);
    }

    #[test]
    fn missing_file_is_not_found() {
        let err = parse_scenario(Path::new("/nonexistent/scenario.toml")).unwrap_err();
        assert!(matches!(err, Error::NotFound(_)));
        assert_eq!(err.exit_code(), 2);
    }
}
