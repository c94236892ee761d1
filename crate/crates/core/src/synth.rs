//! Deterministic synthetic corpora with planted malicious call motifs.
//!
//! Benign traces are i.i.d. draws from a background vocabulary. Malicious
//! traces use the same background with one or more motifs spliced in whole,
//! so any detector keyed on motif-length n-grams can separate the classes.
//! Benign draws that happen to contain a motif are rejected and redrawn.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::trace::{is_valid_token, CorpusManifest, Label, ManifestEntry, SyscallTrace};

const MAX_REDRAWS: usize = 10_000;

pub const MANIFEST_FILE: &str = "manifest.csv";

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn repeat_cycle(cycle: &[&str], len: usize) -> Vec<String> {
    cycle.iter().cycle().take(len).map(|s| s.to_string()).collect()
}

/// Background calls taken from the example trace excerpts.
pub fn default_background() -> Vec<String> {
    names(&[
        "ntclose",
        "ntopenkeyex",
        "ntcreatefile",
        "ntcreatesection",
        "ntmapviewofsection",
        "ntqueryvirtualmemory",
        "ntqueryperformancecounter",
        "ntprotectvirtualmemory",
        "ntquerysysteminformation",
    ])
}

/// Ten-call motifs shaped like the most informative malicious features
/// reported for real traces.
pub fn default_motifs() -> Vec<Vec<String>> {
    vec![
        repeat_cycle(&["ntdelayexecution"], 10),
        repeat_cycle(
            &[
                "ntgetcurrentprocessornumber",
                "ntgetcurrentprocessornumber",
                "ntalpcsendwaitreceiveport",
            ],
            10,
        ),
        repeat_cycle(&["ntdeviceiocontrolfile", "ntclose", "ntcreateevent"], 10),
        repeat_cycle(&["ntqueryinformationthread"], 10),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub n_traces: usize,
    pub malicious_fraction: f64,
    /// Inclusive bounds on the total number of calls per trace.
    pub trace_len_range: (usize, usize),
    pub background_vocab: Vec<String>,
    pub malicious_motifs: Vec<Vec<String>>,
    /// Poisson mean of motif insertions per malicious trace (at least one
    /// is always inserted).
    pub motif_rate: f64,
    pub seed: u64,
    /// Write traces as raw `name( ... ) => 0` log lines instead of the
    /// processed one-name-per-line format.
    pub raw_format: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_traces: 500,
            malicious_fraction: 0.637,
            trace_len_range: (60, 120),
            background_vocab: default_background(),
            malicious_motifs: default_motifs(),
            motif_rate: 5.0,
            seed: 42,
            raw_format: false,
        }
    }
}

impl GeneratorConfig {
    pub fn n_malicious(&self) -> usize {
        (self.n_traces as f64 * self.malicious_fraction + 0.5).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traces < 2 {
            return Err(Error::config("n_traces", format!("must be >= 2, got {}", self.n_traces)));
        }
        if !(self.malicious_fraction > 0.0 && self.malicious_fraction < 1.0) {
            return Err(Error::config(
                "malicious_fraction",
                format!("must be in (0, 1), got {}", self.malicious_fraction),
            ));
        }
        let m = self.n_malicious();
        if m == 0 || m == self.n_traces {
            return Err(Error::config(
                "malicious_fraction",
                format!("yields {m} malicious of {} traces; both classes are required", self.n_traces),
            ));
        }
        let (lo, hi) = self.trace_len_range;
        if lo == 0 || hi < lo {
            return Err(Error::config("trace_len_range", format!("invalid range ({lo}, {hi})")));
        }
        if self.background_vocab.is_empty() {
            return Err(Error::config("background_vocab", "must not be empty"));
        }
        if let Some(bad) = self.background_vocab.iter().find(|t| !is_valid_token(t)) {
            return Err(Error::config("background_vocab", format!("invalid call name {bad:?}")));
        }
        if self.malicious_motifs.is_empty() || self.malicious_motifs.iter().any(Vec::is_empty) {
            return Err(Error::config("malicious_motifs", "need at least one non-empty motif"));
        }
        if let Some(bad) = self.malicious_motifs.iter().flatten().find(|t| !is_valid_token(t)) {
            return Err(Error::config("malicious_motifs", format!("invalid call name {bad:?}")));
        }
        if !(self.motif_rate > 0.0 && self.motif_rate.is_finite()) {
            return Err(Error::config("motif_rate", format!("must be > 0, got {}", self.motif_rate)));
        }
        Ok(())
    }
}

/// True when `motif` occurs contiguously in `calls`.
pub fn contains_motif(calls: &[String], motif: &[String]) -> bool {
    !motif.is_empty() && calls.windows(motif.len()).any(|w| w == motif)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub traces: Vec<SyscallTrace>,
    pub manifest: CorpusManifest,
    pub raw_format: bool,
}

fn file_name(i: usize) -> String {
    format!("trace_{i:05}.txt")
}

fn draw_background(rng: &mut ChaCha8Rng, vocab: &[String], len: usize) -> Vec<String> {
    (0..len)
        .map(|_| vocab[rng.random_range(0..vocab.len())].clone())
        .collect()
}

fn draw_benign(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig) -> Result<Vec<String>> {
    for _ in 0..MAX_REDRAWS {
        let len = rng.random_range(cfg.trace_len_range.0..=cfg.trace_len_range.1);
        let calls = draw_background(rng, &cfg.background_vocab, len);
        if !cfg.malicious_motifs.iter().any(|m| contains_motif(&calls, m)) {
            return Ok(calls);
        }
    }
    Err(Error::config(
        "background_vocab",
        "could not draw a benign trace free of every motif",
    ))
}

fn draw_malicious(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig) -> Vec<String> {
    let poisson = Poisson::new(cfg.motif_rate).expect("validated rate");
    let k = (poisson.sample(rng) as usize).max(1);
    let chosen: Vec<&Vec<String>> = (0..k)
        .map(|_| &cfg.malicious_motifs[rng.random_range(0..cfg.malicious_motifs.len())])
        .collect();
    let motif_len: usize = chosen.iter().map(|m| m.len()).sum();
    let len = rng.random_range(cfg.trace_len_range.0..=cfg.trace_len_range.1);
    let background = draw_background(rng, &cfg.background_vocab, len.saturating_sub(motif_len));

    // splice every motif at a position of the original background so none
    // of them is cut by a later insertion
    let mut cuts: Vec<(usize, usize)> = chosen
        .iter()
        .enumerate()
        .map(|(j, _)| (rng.random_range(0..=background.len()), j))
        .collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(background.len() + motif_len);
    let mut at = 0;
    for (pos, j) in cuts {
        out.extend_from_slice(&background[at..pos]);
        out.extend(chosen[j].iter().cloned());
        at = pos;
    }
    out.extend_from_slice(&background[at..]);
    out
}

/// Generates the corpus in memory. Each trace draws from its own RNG
/// stream, so the result does not depend on the execution mode.
pub fn generate(cfg: &GeneratorConfig, exec: Exec) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let n_mal = cfg.n_malicious();
    let mut labels: Vec<Label> = (0..cfg.n_traces)
        .map(|i| if i < n_mal { Label::Malicious } else { Label::Benign })
        .collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        labels.shuffle(&mut rng);
    }
    let jobs: Vec<(usize, Label)> = labels.iter().copied().enumerate().collect();
    let traces = exec.try_map(&jobs, |&(i, label)| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64 + 1);
        let calls = match label {
            Label::Benign => draw_benign(&mut rng, cfg)?,
            Label::Malicious => draw_malicious(&mut rng, cfg),
        };
        Ok::<_, Error>(SyscallTrace::new(file_name(i), calls).with_label(label))
    })?;
    let entries = traces
        .iter()
        .map(|t| ManifestEntry {
            path: PathBuf::from(&t.source_id),
            label: t.label.expect("labeled"),
        })
        .collect();
    Ok(SyntheticCorpus {
        traces,
        manifest: CorpusManifest::new(entries)?,
        raw_format: cfg.raw_format,
    })
}

/// Raw-log rendering used to exercise the parser: one `name( ... ) => 0`
/// line per call with an occasional DLL-unload line in between.
pub fn render_raw(trace: &SyscallTrace) -> String {
    let mut out = String::new();
    for (k, c) in trace.calls.iter().enumerate() {
        if k % 17 == 5 {
            out.push_str(&format!("Unload of DLL at {:08X}\n", 0x04ED_0000 + k * 0x1000));
        }
        out.push_str(&format!("{c}( Handle=0x{:x}, Flags=0 ) => 0\n", 0x100 + k * 4));
    }
    out
}

impl SyntheticCorpus {
    /// Writes one file per trace plus `manifest.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for t in &self.traces {
            let path = dir.join(&t.source_id);
            let body = if self.raw_format { render_raw(t) } else { t.render_processed() };
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        let mpath = dir.join(MANIFEST_FILE);
        self.manifest.write(&mpath)?;
        Ok(mpath)
    }
}
