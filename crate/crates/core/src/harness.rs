//! Experiment orchestration: configuration, Monte-Carlo runs and CSV output.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dsp::ComplexSignal;
use crate::error::{Error, Result};
use crate::link::{
    apply_channel, awgn_ser_4qam_reference, random_qam4, receive, ser_count, ChannelSpec, Receiver, SerCurve, SerPoint,
    CFO_REFERENCE_LEN, DEFAULT_CFO_SWEEP, DEFAULT_DSIC_ITERS,
};
use crate::modem::{
    add_cp, baseline_gfdm, baseline_wcp_coqam, build_symbol_grid, modulate, transmit_frame, ModemConfig, Scheme,
    BASELINE_CP_LEN, BASELINE_OCCUPIED, BASELINE_SLOTS, BASELINE_SUBCARRIERS, BASELINE_WINDOW_RAMP,
};
use crate::spectral::{
    analytic_psd, oversample_truncate, symmetric_grid, AnalyticPsdConfig, PeriodogramAccumulator, PsdEstimate,
    INTERP_ROLLOFF, INTERP_SPAN_SYMBOLS, OVERSAMPLING,
};

pub const DEFAULT_MC_RUNS: usize = 300;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SNR_GRID_DB: [f64; 7] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
/// Frequency points of the closed-form PSD over [-3, 3] F_s.
pub const ANALYTIC_GRID_POINTS: usize = 1201;
/// Trials per parallel work unit; partial results merge in chunk order.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Psd,
    Ser,
    AnalyticPsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Plain,
    G,
    W,
    Gw,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Plain, Variant::G, Variant::W, Variant::Gw];

    pub fn guards(self) -> bool {
        matches!(self, Variant::G | Variant::Gw)
    }

    pub fn window(self) -> bool {
        matches!(self, Variant::W | Variant::Gw)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::G => "G",
            Variant::W => "W",
            Variant::Gw => "GW",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" | "none" => Ok(Variant::Plain),
            "g" => Ok(Variant::G),
            "w" => Ok(Variant::W),
            "gw" | "wg" => Ok(Variant::Gw),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Cost207,
    Awgn,
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "cost207" | "cost207ht" => Ok(ChannelKind::Cost207),
            "awgn" | "identity" => Ok(ChannelKind::Awgn),
            other => Err(Error::Config(format!("unknown channel '{other}'"))),
        }
    }
}

/// Everything one experiment run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub schemes: Vec<Scheme>,
    pub variants: Vec<Variant>,
    /// OFDM with K = 1152 and 684 occupied carriers instead of K = 128 / 76.
    pub equal_se: bool,
    pub mc_runs: usize,
    pub seed: u64,
    /// CFO values in units of F_s / 1152.
    pub cfo_sweep: Vec<f64>,
    pub snr_grid_db: Vec<f64>,
    pub output_path: PathBuf,
    pub channel: ChannelKind,
    pub dsic_iters: usize,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment) -> Self {
        let (variants, out) = match experiment {
            Experiment::Psd => (Variant::ALL.to_vec(), "psd.csv"),
            Experiment::AnalyticPsd => (vec![Variant::Plain, Variant::G], "analytic_psd.csv"),
            Experiment::Ser => (vec![Variant::G], "ser.csv"),
        };
        let schemes = match experiment {
            Experiment::AnalyticPsd => vec![Scheme::Ofdm],
            _ => Scheme::ALL.to_vec(),
        };
        Self {
            experiment,
            schemes,
            variants,
            equal_se: false,
            mc_runs: DEFAULT_MC_RUNS,
            seed: DEFAULT_SEED,
            cfo_sweep: DEFAULT_CFO_SWEEP.to_vec(),
            snr_grid_db: DEFAULT_SNR_GRID_DB.to_vec(),
            output_path: PathBuf::from(out),
            channel: ChannelKind::Cost207,
            dsic_iters: DEFAULT_DSIC_ITERS,
        }
    }

    /// Sets one key from its textual value. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "schemes" => self.schemes = parse_list(value, str::parse)?,
            "variants" => self.variants = parse_list(value, str::parse)?,
            "equal_se" => self.equal_se = parse_bool(value)?,
            "mc_runs" => self.mc_runs = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "cfo_sweep" => self.cfo_sweep = parse_list(value, parse_f64_item)?,
            "snr_grid_db" => self.snr_grid_db = parse_list(value, parse_f64_item)?,
            "out" | "output_path" => self.output_path = PathBuf::from(value),
            "channel" => self.channel = value.parse()?,
            "dsic_iters" => self.dsic_iters = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_config_str(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", no + 1, strip_prefix(e))))?;
        }
        Ok(())
    }

    pub fn load_config(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_config_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.mc_runs == 0 {
            return fail("mc_runs must be at least 1");
        }
        if self.schemes.is_empty() {
            return fail("no schemes selected");
        }
        match self.experiment {
            Experiment::Psd if self.variants.is_empty() => fail("no variants selected"),
            Experiment::AnalyticPsd if self.variants.iter().any(|v| v.window()) => {
                fail("the closed-form PSD covers unwindowed OFDM only")
            }
            Experiment::AnalyticPsd if self.schemes != [Scheme::Ofdm] => {
                fail("the closed-form PSD is defined for OFDM only")
            }
            Experiment::Ser if self.cfo_sweep.is_empty() || self.snr_grid_db.is_empty() => {
                fail("empty CFO sweep or SNR grid")
            }
            Experiment::Ser if self.cfo_sweep.iter().chain(&self.snr_grid_db).any(|v| v.is_nan()) => {
                fail("CFO and SNR values must be numbers")
            }
            _ => Ok(()),
        }
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidArgument(m) => m,
        other => other.to_string(),
    }
}

fn parse_list<T>(value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split([',', ' ', '\t'])
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn parse_f64_item(item: &str) -> Result<f64> {
    item.parse()
        .map_err(|e| Error::Config(format!("bad list item '{item}': {e}")))
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(Error::Config(format!("expected a boolean, got '{other}'"))),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// OFDM numerology: (K, occupied with guards) for either efficiency setting.
fn ofdm_size(equal_se: bool) -> (usize, usize) {
    if equal_se {
        (
            BASELINE_SUBCARRIERS * BASELINE_SLOTS,
            BASELINE_OCCUPIED * BASELINE_SLOTS,
        )
    } else {
        (BASELINE_SUBCARRIERS, BASELINE_OCCUPIED)
    }
}

/// Transmitter config and number of back-to-back symbols per PSD frame.
fn psd_setup(scheme: Scheme, variant: Variant, equal_se: bool) -> Result<(ModemConfig, usize)> {
    let ramp = if variant.window() { BASELINE_WINDOW_RAMP } else { 0 };
    match scheme {
        Scheme::Ofdm => {
            let (k, guarded) = ofdm_size(equal_se);
            let occ = if variant.guards() { guarded } else { k };
            let symbols = if equal_se { 1 } else { BASELINE_SLOTS };
            Ok((ModemConfig::ofdm(k, occ, BASELINE_CP_LEN, ramp)?, symbols))
        }
        Scheme::Gfdm | Scheme::WcpCoqam => {
            let occ = if variant.guards() {
                BASELINE_OCCUPIED
            } else {
                BASELINE_SUBCARRIERS
            };
            let cfg = if scheme == Scheme::Gfdm {
                baseline_gfdm(occ, ramp)?
            } else {
                baseline_wcp_coqam(occ, ramp)?
            };
            Ok((cfg, 1))
        }
    }
}

/// One Monte-Carlo PSD frame: every symbol is oversampled and truncated on
/// its own, then the symbols are concatenated.
fn psd_frame(cfg: &ModemConfig, symbols: usize, seed: u64, trial: u64) -> Result<ComplexSignal> {
    let mut rng = trial_rng(seed, 2 * trial);
    let mut out = Vec::with_capacity(symbols * cfg.frame_len() * OVERSAMPLING);
    for _ in 0..symbols {
        let grid = build_symbol_grid(&random_qam4(&mut rng, cfg.symbols_per_frame()), cfg)?;
        let x = transmit_frame(&grid, cfg)?;
        let up = oversample_truncate(&x, OVERSAMPLING, INTERP_SPAN_SYMBOLS, INTERP_ROLLOFF)?;
        out.extend_from_slice(up.samples());
    }
    ComplexSignal::new(out, OVERSAMPLING as f64)
}

/// Averaged periodogram of one (scheme, variant) configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdCurve {
    pub scheme: Scheme,
    pub variant: Variant,
    pub equal_se: bool,
    pub estimate: PsdEstimate,
}

fn chunks(total: usize) -> Vec<(u64, u64)> {
    (0..total.div_ceil(CHUNK))
        .map(|c| ((c * CHUNK) as u64, ((c + 1) * CHUNK).min(total) as u64))
        .collect()
}

pub fn simulate_psd(scheme: Scheme, variant: Variant, equal_se: bool, mc_runs: usize, seed: u64) -> Result<PsdCurve> {
    let (cfg, symbols) = psd_setup(scheme, variant, equal_se)?;
    let len = symbols * cfg.frame_len() * OVERSAMPLING;
    let parts: Vec<Result<PeriodogramAccumulator>> = chunks(mc_runs)
        .into_par_iter()
        .map(|(a, b)| {
            let mut acc = PeriodogramAccumulator::new(len, OVERSAMPLING as f64);
            for t in a..b {
                acc.add(&psd_frame(&cfg, symbols, seed, t)?)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = PeriodogramAccumulator::new(len, OVERSAMPLING as f64);
    for p in parts {
        total.merge(&p?)?;
    }
    Ok(PsdCurve {
        scheme,
        variant,
        equal_se,
        estimate: total.finish()?,
    })
}

pub fn run_psd_experiment(spec: &ExperimentSpec) -> Result<Vec<PsdCurve>> {
    spec.validate()?;
    match spec.experiment {
        Experiment::AnalyticPsd => return run_analytic_psd(spec),
        Experiment::Ser => return Err(Error::Config("not a PSD experiment".into())),
        Experiment::Psd => {}
    }
    let mut out = Vec::new();
    for &scheme in &spec.schemes {
        for &variant in &spec.variants {
            out.push(simulate_psd(scheme, variant, spec.equal_se, spec.mc_runs, spec.seed)?);
        }
    }
    out.sort_by_key(|c| (c.scheme, c.variant));
    Ok(out)
}

fn run_analytic_psd(spec: &ExperimentSpec) -> Result<Vec<PsdCurve>> {
    let grid = symmetric_grid(OVERSAMPLING as f64 / 2.0, ANALYTIC_GRID_POINTS);
    let mut out = Vec::new();
    for &variant in &spec.variants {
        let occ = if variant.guards() {
            BASELINE_OCCUPIED
        } else {
            BASELINE_SUBCARRIERS
        };
        let cfg = AnalyticPsdConfig::baseline(occ)?;
        out.push(PsdCurve {
            scheme: Scheme::Ofdm,
            variant,
            equal_se: spec.equal_se,
            estimate: analytic_psd(&cfg, &grid, spec.equal_se)?,
        });
    }
    out.sort_by_key(|c| c.variant);
    Ok(out)
}

pub fn psd_csv(curves: &[PsdCurve]) -> String {
    let mut s = String::from("scheme,variant,equal_se,freq_over_fs,psd_db\n");
    for c in curves {
        for (f, v) in c.estimate.freqs().iter().zip(c.estimate.values_db()) {
            let _ = writeln!(s, "{},{},{},{:.6},{:.4}", c.scheme, c.variant, c.equal_se, f, v);
        }
    }
    s
}

/// Receivers evaluated for each scheme.
pub fn receivers_for(scheme: Scheme) -> &'static [Receiver] {
    match scheme {
        Scheme::Gfdm => &[Receiver::Zf, Receiver::Mf, Receiver::MfDsic],
        _ => &[Receiver::Zf],
    }
}

/// Transmitter config for the SER experiment: guard carriers, no window.
pub fn ser_config(scheme: Scheme, equal_se: bool) -> Result<ModemConfig> {
    match scheme {
        Scheme::Ofdm => {
            let (k, occ) = ofdm_size(equal_se);
            ModemConfig::ofdm(k, occ, BASELINE_CP_LEN, 0)
        }
        Scheme::Gfdm => baseline_gfdm(BASELINE_OCCUPIED, 0),
        Scheme::WcpCoqam => baseline_wcp_coqam(BASELINE_OCCUPIED, 0),
    }
}

/// SER points plus the analytic AWGN reference on the same SNR grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SerTable {
    pub curve: SerCurve,
    pub reference: Vec<(f64, f64)>,
}

/// Error counts for every (receiver, CFO, SNR) of one scheme. Trial t draws
/// its data from stream 2t and its noise from stream 2t+1, so all grid
/// points see the same realizations.
pub fn simulate_ser(
    cfg: &ModemConfig,
    channel: &ChannelSpec,
    cfo_sweep: &[f64],
    snr_grid_db: &[f64],
    mc_runs: usize,
    seed: u64,
    dsic_iters: usize,
) -> Result<Vec<SerPoint>> {
    let receivers = receivers_for(cfg.scheme());
    let cells = receivers.len() * cfo_sweep.len() * snr_grid_db.len();
    let h = channel.frequency_response(cfg.block_len())?;
    let parts: Vec<Result<Vec<u64>>> = chunks(mc_runs)
        .into_par_iter()
        .map(|(a, b)| {
            let mut errs = vec![0u64; cells];
            for t in a..b {
                let mut rng = trial_rng(seed, 2 * t);
                let tx = build_symbol_grid(&random_qam4(&mut rng, cfg.symbols_per_frame()), cfg)?;
                let x = add_cp(&modulate(&tx, cfg)?, cfg.cp_len())?;
                for (ci, &cfo) in cfo_sweep.iter().enumerate() {
                    for (si, &snr) in snr_grid_db.iter().enumerate() {
                        let ch = channel.clone().with_cfo(cfo).with_snr_db(snr);
                        let y = apply_channel(&x, &ch, &mut trial_rng(seed, 2 * t + 1))?;
                        for (ri, &rcv) in receivers.iter().enumerate() {
                            let rx = receive(&y, cfg, &h, rcv, dsic_iters)?;
                            let (e, _) = ser_count(&tx, &rx)?;
                            errs[(ri * cfo_sweep.len() + ci) * snr_grid_db.len() + si] += e as u64;
                        }
                    }
                }
            }
            Ok(errs)
        })
        .collect();
    let mut errs = vec![0u64; cells];
    for p in parts {
        errs.iter_mut().zip(p?).for_each(|(a, b)| *a += b);
    }
    let mut points = Vec::with_capacity(cells);
    for (ri, &receiver) in receivers.iter().enumerate() {
        for (ci, &cfo_frac) in cfo_sweep.iter().enumerate() {
            for (si, &snr_db) in snr_grid_db.iter().enumerate() {
                points.push(SerPoint {
                    scheme: cfg.scheme(),
                    receiver,
                    cfo_frac,
                    snr_db,
                    errors: errs[(ri * cfo_sweep.len() + ci) * snr_grid_db.len() + si],
                    trials: mc_runs as u64,
                    symbols_per_trial: cfg.symbols_per_frame() as u64,
                });
            }
        }
    }
    Ok(points)
}

pub fn experiment_channel(kind: ChannelKind, seed: u64) -> Result<ChannelSpec> {
    let ch = match kind {
        ChannelKind::Cost207 => ChannelSpec::cost207_hilly_terrain(seed)?,
        ChannelKind::Awgn => ChannelSpec::identity(),
    };
    Ok(ch.with_cfo_reference(CFO_REFERENCE_LEN))
}

pub fn run_ser_experiment(spec: &ExperimentSpec) -> Result<SerTable> {
    spec.validate()?;
    if spec.experiment != Experiment::Ser {
        return Err(Error::Config("not an SER experiment".into()));
    }
    let channel = experiment_channel(spec.channel, spec.seed)?;
    let mut points = Vec::new();
    for &scheme in &spec.schemes {
        let cfg = ser_config(scheme, spec.equal_se)?;
        points.extend(simulate_ser(
            &cfg,
            &channel,
            &spec.cfo_sweep,
            &spec.snr_grid_db,
            spec.mc_runs,
            spec.seed,
            spec.dsic_iters,
        )?);
    }
    points.sort_by(|a, b| {
        (a.scheme, a.receiver)
            .cmp(&(b.scheme, b.receiver))
            .then(a.cfo_frac.total_cmp(&b.cfo_frac))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
    let mut snrs = spec.snr_grid_db.clone();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let reference = snrs.iter().copied().zip(awgn_ser_4qam_reference(&snrs)?).collect();
    Ok(SerTable {
        curve: SerCurve { points },
        reference,
    })
}

pub fn ser_csv(table: &SerTable) -> String {
    let mut s = String::from("scheme,receiver,cfo_frac,snr_db,errors,trials,ser\n");
    for p in &table.curve.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.6e}",
            p.scheme,
            p.receiver,
            p.cfo_frac,
            p.snr_db,
            p.errors,
            p.trials,
            p.ser()
        );
    }
    for (snr, ser) in &table.reference {
        let _ = writeln!(s, "OFDM-AWGN,analytic,0,{snr},,,{ser:.6e}");
    }
    s
}

/// Runs the experiment and returns its CSV text.
pub fn run_to_csv(spec: &ExperimentSpec) -> Result<String> {
    match spec.experiment {
        Experiment::Ser => Ok(ser_csv(&run_ser_experiment(spec)?)),
        _ => Ok(psd_csv(&run_psd_experiment(spec)?)),
    }
}

/// Runs the experiment and writes the CSV to `spec.output_path`. Returns
/// the number of data rows.
pub fn run_to_file(spec: &ExperimentSpec) -> Result<usize> {
    let csv = run_to_csv(spec)?;
    fs::write(&spec.output_path, &csv).map_err(|source| Error::Io {
        path: spec.output_path.clone(),
        source,
    })?;
    Ok(csv.lines().count() - 1)
}
