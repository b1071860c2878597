//! Pipeline steps. Each step reads the artifacts of earlier steps from the
//! scenario directory and is skipped when the manifest holds a record with
//! the same input key whose outputs still exist.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use adequacy_core::cluster::{name_clusters, normalize_events, select_k, write_centroids_csv, write_scores_csv};
use adequacy_core::cluster::{KSelection, SdeType};
use adequacy_core::events::{detect_year, hourly_cost, net_load, SdeConfig, SdeEvent};
use adequacy_core::optim::export::{export_solution, write_ledger_csv};
use adequacy_core::resilience::{
    aggregate_rows_cols, build_report, daily_quantity, sde_cost_share, similarity_matrix, validate_entry,
    write_aggregates_csv, write_cost_share_csv, write_matrix_csv, write_ranks_csv, write_report_csv,
    write_similarity_csv, Cell, Metric, ReportInputs, SimilarityQuantity, ValidationMatrix, YearMetrics,
};
use adequacy_core::timeseries::{read_csv, split_weather_years, synth_weather, write_csv};
use adequacy_core::{
    build_design, revenue_ledger, solve, Capacities, Error, Network, Result, Solution, WeatherYearSeries,
};
use indexmap::IndexMap;
use log::info;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{year_dir, Config, WeatherConfig};
use crate::manifest::{relative, step_key, Manifest, StepRecord, StepStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Synth,
    Solve,
    Detect,
    Cluster,
    Validate,
    Similarity,
    Report,
    Sweep,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::Synth => "synth",
            Step::Solve => "solve",
            Step::Detect => "detect",
            Step::Cluster => "cluster",
            Step::Validate => "validate",
            Step::Similarity => "similarity",
            Step::Report => "report",
            Step::Sweep => "sweep",
        }
    }

    fn upstream(self, synth: bool) -> &'static [Step] {
        match self {
            Step::Synth => &[],
            Step::Solve if synth => &[Step::Synth],
            Step::Solve => &[],
            Step::Detect | Step::Validate | Step::Similarity => &[Step::Solve],
            Step::Cluster => &[Step::Detect],
            Step::Report => &[Step::Detect, Step::Cluster, Step::Validate],
            Step::Sweep => &[Step::Detect],
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("config serialises")
}

/// SHA-256 of a file's bytes, or a marker when it cannot be read.
fn file_digest(path: &Path) -> String {
    std::fs::read(path).map_or_else(|_| "unreadable".to_string(), |b| hex::encode(Sha256::digest(b)))
}

/// What a step produced.
struct Outcome {
    outputs: Vec<PathBuf>,
    status: StepStatus,
    note: Option<String>,
}

impl Outcome {
    fn done(outputs: Vec<PathBuf>) -> Self {
        Outcome {
            outputs,
            status: StepStatus::Done,
            note: None,
        }
    }
}

pub struct Pipeline {
    pub config: Config,
    /// Output root holding the manifest.
    pub root: PathBuf,
    /// `<root>/<scenario>`.
    pub dir: PathBuf,
    pub ladder: Vec<f64>,
    pub manifest: Manifest,
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads an artifact, naming the step that should have produced it.
pub fn read_artifact<T: DeserializeOwned>(path: &Path, producer: Step) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingInput(format!(
            "missing artifact {} (run `{}` first)",
            path.display(),
            producer.as_str()
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterArtifact {
    /// Set when too few events were found to cluster.
    pub skipped: Option<String>,
    pub selection: Option<KSelection>,
    pub cluster_types: Vec<Option<SdeType>>,
    /// Event id to type.
    pub event_types: IndexMap<usize, SdeType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub parameter: String,
    pub value: f64,
    pub event_id: usize,
    pub weather_year: String,
    /// Highest threshold with an overlapping event, EUR; `None` if absent.
    pub matched_threshold: Option<f64>,
    pub matched_multiplier: Option<f64>,
}

impl Pipeline {
    pub fn new(config: Config, root: PathBuf, ladder: Option<Vec<f64>>) -> Result<Self> {
        let dir = root.join(&config.name);
        let ladder = ladder.unwrap_or_else(|| config.sweep.ladder.clone());
        crate::config::check_ladder(&ladder)?;
        let manifest = Manifest::load_or_new(&root, config.hash(), config.seed)?;
        Ok(Pipeline {
            config,
            root,
            dir,
            ladder,
            manifest,
        })
    }

    fn is_synth(&self) -> bool {
        matches!(self.config.weather, WeatherConfig::Synth(_))
    }

    fn id(&self, step: Step) -> String {
        format!("{}/{}", self.config.name, step.as_str())
    }

    fn key(&self, step: Step) -> String {
        let upstream: Vec<String> = step
            .upstream(self.is_synth())
            .iter()
            .map(|s| {
                self.manifest
                    .steps
                    .get(&self.id(*s))
                    .map_or_else(|| "none".to_string(), |r| r.key.clone())
            })
            .collect();
        let inputs = self.inputs(step);
        let mut parts = vec![step.as_str(), inputs.as_str()];
        parts.extend(upstream.iter().map(String::as_str));
        step_key(&parts)
    }

    /// The slice of the config a step reads, so that e.g. a new event
    /// threshold does not invalidate the LP solves.
    fn inputs(&self, step: Step) -> String {
        let c = &self.config;
        let s = &c.network.scenario;
        match step {
            Step::Synth => format!("{}|{}", to_json(&c.weather), c.seed),
            Step::Solve | Step::Validate => {
                let weather = match &c.weather {
                    WeatherConfig::Csv { path } => file_digest(path),
                    WeatherConfig::Synth(_) => String::new(),
                };
                format!("{}|{}|{}", to_json(&self.lp_network()), to_json(&c.solver), weather)
            }
            Step::Detect => format!("{}|{}", s.sde_threshold, s.sde_window_hours),
            Step::Cluster => format!("{}|{}", to_json(&c.cluster), c.seed),
            Step::Similarity => String::new(),
            Step::Report => s.sde_window_hours.to_string(),
            Step::Sweep => format!("{}|{:?}", self.manifest.config_hash, self.ladder),
        }
    }

    /// The network with the event-detection knobs blanked out.
    fn lp_network(&self) -> Network {
        let mut net = self.config.network.clone();
        let d = adequacy_core::Scenario::default();
        net.scenario.sde_threshold = d.sde_threshold;
        net.scenario.sde_window_hours = d.sde_window_hours;
        net
    }

    /// The steps `all` runs, in order.
    pub fn all_steps(&self) -> Vec<Step> {
        let mut steps = Vec::new();
        if self.is_synth() {
            steps.push(Step::Synth);
        }
        steps.extend([
            Step::Solve,
            Step::Detect,
            Step::Cluster,
            Step::Validate,
            Step::Similarity,
            Step::Report,
        ]);
        steps
    }

    /// Runs one step unless cached, then saves the manifest. Returns whether
    /// the step was a cache hit.
    pub fn run(&mut self, step: Step) -> Result<bool> {
        let id = self.id(step);
        let key = self.key(step);
        if !self.manifest.scenarios.contains(&self.config.name) {
            self.manifest.scenarios.push(self.config.name.clone());
        }
        if let Some(rec) = self.manifest.cached(&id, &key, &self.root) {
            let mut rec = rec.clone();
            info!("{id}: unchanged inputs, skipping");
            rec.cache_hit = true;
            self.manifest.record(id, rec);
            self.manifest.save(&self.root)?;
            return Ok(true);
        }
        info!("{id}: running");
        let outcome = match step {
            Step::Synth => self.synth(),
            Step::Solve => self.solve(),
            Step::Detect => self.detect(),
            Step::Cluster => self.cluster(),
            Step::Validate => self.validate(),
            Step::Similarity => self.similarity(),
            Step::Report => self.report(),
            Step::Sweep => self.sweep(),
        }?;
        let mut outputs: Vec<String> = outcome.outputs.iter().map(|p| relative(&self.root, p)).collect();
        outputs.sort();
        outputs.dedup();
        self.manifest.record(
            id,
            StepRecord {
                status: outcome.status,
                key,
                outputs,
                cache_hit: false,
                note: outcome.note,
            },
        );
        self.manifest.save(&self.root)?;
        Ok(false)
    }

    fn weather_csv(&self) -> PathBuf {
        match &self.config.weather {
            WeatherConfig::Csv { path } => path.clone(),
            WeatherConfig::Synth(_) => self.dir.join("weather.csv"),
        }
    }

    pub fn load_weather(&self) -> Result<Vec<WeatherYearSeries>> {
        let path = self.weather_csv();
        if !path.exists() {
            return Err(Error::MissingInput(format!(
                "missing artifact {} (run `synth` first)",
                path.display()
            )));
        }
        let (years, warnings) = split_weather_years(&read_csv(&path)?)?;
        for w in warnings {
            log::warn!("{}: {}", w.label, w.message);
        }
        if years.is_empty() {
            return Err(Error::TimeSeries(format!("{} holds no complete weather year", path.display())));
        }
        Ok(years)
    }

    pub fn year_path(&self, label: &str, file: &str) -> PathBuf {
        self.dir.join(year_dir(label)).join(file)
    }

    pub fn load_solutions(&self, years: &[WeatherYearSeries]) -> Result<Vec<Solution>> {
        years
            .iter()
            .map(|y| read_artifact(&self.year_path(&y.label, "solution.json"), Step::Solve))
            .collect()
    }

    pub fn load_events(&self) -> Result<Vec<SdeEvent>> {
        read_artifact(&self.dir.join("events.json"), Step::Detect)
    }

    fn synth(&self) -> Result<Outcome> {
        let WeatherConfig::Synth(spec) = &self.config.weather else {
            return Err(Error::Config("`synth` needs weather.kind = \"synth\"".into()));
        };
        let years = spec
            .specs(self.config.seed)
            .par_iter()
            .map(synth_weather)
            .collect::<Result<Vec<_>>>()?;
        let path = self.dir.join("weather.csv");
        write_csv(&years, create(&path)?)?;
        Ok(Outcome::done(vec![path]))
    }

    fn design(&self, network: &Network, year: &WeatherYearSeries) -> Result<Solution> {
        let model = build_design(network, year)?;
        let sol = solve(&model, &self.config.solver.highs(), self.config.solver.tolerance)?;
        if !sol.is_optimal() {
            return Err(Error::Solver(format!(
                "design LP for {} is {}",
                year.label,
                sol.status.as_str()
            )));
        }
        info!(
            "{}: design objective {:.6e} EUR ({} iterations)",
            year.label, sol.objective, sol.stats.iterations
        );
        Ok(sol)
    }

    /// Design solves for every year, written under `dir/<year>/`.
    fn solve_into(&self, network: &Network, dir: &Path, years: &[WeatherYearSeries]) -> Result<Vec<PathBuf>> {
        let results: Vec<Vec<PathBuf>> = years
            .par_iter()
            .map(|y| {
                let sol = self.design(network, y)?;
                let ydir = dir.join(year_dir(&y.label));
                let mut out = export_solution(&ydir, &sol)?;
                let ledger_path = ydir.join("ledger.csv");
                write_ledger_csv(create(&ledger_path)?, &revenue_ledger(&sol, network, None))?;
                out.push(ledger_path);
                let sol_path = ydir.join("solution.json");
                write_json(&sol_path, &sol)?;
                out.push(sol_path);
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Ok(results.into_iter().flatten().collect())
    }

    fn solve(&self) -> Result<Outcome> {
        let years = self.load_weather()?;
        Ok(Outcome::done(self.solve_into(&self.config.network, &self.dir, &years)?))
    }

    fn detect_all(
        &self,
        network: &Network,
        years: &[WeatherYearSeries],
        solutions: &[Solution],
        config: &SdeConfig,
    ) -> Result<Vec<SdeEvent>> {
        let mut events = Vec::new();
        for (y, sol) in years.iter().zip(solutions) {
            let found = detect_year(network, y, sol, config, events.len())?;
            events.extend(found);
        }
        Ok(events)
    }

    fn detect(&self) -> Result<Outcome> {
        let net = &self.config.network;
        let years = self.load_weather()?;
        let solutions = self.load_solutions(&years)?;
        let config = SdeConfig::from_scenario(&net.scenario);
        let events = self.detect_all(net, &years, &solutions, &config)?;
        info!("{} events over {} weather years", events.len(), years.len());
        let mut outputs = Vec::new();
        for (y, sol) in years.iter().zip(&solutions) {
            let path = self.year_path(&y.label, "hourly_cost.csv");
            let cost = hourly_cost(sol);
            let nl = net_load(net, sol);
            adequacy_core::optim::export::write_hourly_csv(
                create(&path)?,
                &[("cost_eur".to_string(), &cost[..]), ("net_load_mw".to_string(), &nl[..])],
            )?;
            outputs.push(path);
        }
        let path = self.dir.join("events.json");
        write_json(&path, &events)?;
        outputs.push(path);
        let path = self.dir.join("events.csv");
        write_events_csv(create(&path)?, &events)?;
        outputs.push(path);
        let path = self.dir.join("event_composites.csv");
        write_composites_csv(create(&path)?, &events)?;
        outputs.push(path);
        Ok(Outcome::done(outputs))
    }

    fn cluster(&self) -> Result<Outcome> {
        let events = self.load_events()?;
        let n = events.len();
        let path = self.dir.join("cluster.json");
        let types_path = self.dir.join("event_types.csv");
        let k_max = self.config.cluster.k_max.min(n.saturating_sub(1));
        if n < 3 || k_max < self.config.cluster.k_min {
            let reason = format!("{n} events are too few for k >= {}", self.config.cluster.k_min);
            let artifact = ClusterArtifact {
                skipped: Some(reason.clone()),
                selection: None,
                cluster_types: Vec::new(),
                event_types: IndexMap::new(),
            };
            write_json(&path, &artifact)?;
            write_event_types_csv(create(&types_path)?, &events, &artifact)?;
            return Ok(Outcome {
                outputs: vec![path, types_path],
                status: StepStatus::Skipped,
                note: Some(reason),
            });
        }
        let features: Vec<_> = events.iter().map(|e| e.features).collect();
        let matrix = normalize_events(&features)?;
        let selection = select_k(&matrix, self.config.cluster.k_min..=k_max, self.config.seed)?;
        let cluster_types = name_clusters(&matrix, &selection.model)?;
        let event_types = events
            .iter()
            .zip(&selection.model.labels)
            .filter_map(|(e, &l)| cluster_types[l].map(|t| (e.id, t)))
            .collect();
        let scores_path = self.dir.join("cluster_scores.csv");
        write_scores_csv(create(&scores_path)?, &selection.scores)?;
        let centroids_path = self.dir.join("cluster_centroids.csv");
        write_centroids_csv(create(&centroids_path)?, &matrix, &selection.model, &cluster_types)?;
        let artifact = ClusterArtifact {
            skipped: None,
            selection: Some(selection),
            cluster_types,
            event_types,
        };
        write_json(&path, &artifact)?;
        write_event_types_csv(create(&types_path)?, &events, &artifact)?;
        Ok(Outcome::done(vec![path, types_path, scores_path, centroids_path]))
    }

    /// Capacities the validation matrix operates. Designs are re-solved
    /// without transmission expansion when the scenario allows it, so the
    /// diagonal runs on the same grid as validation.
    fn validation_designs(&self, years: &[WeatherYearSeries]) -> Result<(Vec<Capacities>, Vec<PathBuf>)> {
        let net = &self.config.network;
        let expands = net.scenario.transmission_expansion > 0.0 && net.lines.iter().any(|l| l.extendable);
        if !expands {
            let sols = self.load_solutions(years)?;
            return Ok((sols.into_iter().map(|s| s.capacities).collect(), Vec::new()));
        }
        let mut fixed = net.clone();
        fixed.scenario.transmission_expansion = 0.0;
        let out: Vec<(Capacities, PathBuf)> = years
            .par_iter()
            .map(|y| {
                let path = self.year_path(&y.label, "validation_design.json");
                let sol = self.design(&fixed, y)?;
                write_json(&path, &sol.capacities)?;
                Ok((sol.capacities, path))
            })
            .collect::<Result<_>>()?;
        Ok(out.into_iter().unzip())
    }

    fn validate(&self) -> Result<Outcome> {
        let net = &self.config.network;
        let years = self.load_weather()?;
        // Fails early, naming the artifact, when `solve` has not run.
        self.load_solutions(&years)?;
        let (designs, mut outputs) = self.validation_designs(&years)?;
        let n = years.len();
        let cell_dir = self.dir.join("validation").join("cells");
        let cell_path = |i: usize, j: usize| cell_dir.join(format!("{i}-{j}.json"));
        // Cells from an interrupted run are reused only if they were computed
        // for the same designs.
        let design_hash = step_key(&[&serde_json::to_string(&designs)?, &self.inputs(Step::Validate)]);
        let stamp = cell_dir.join("designs.sha256");
        if std::fs::read_to_string(&stamp).ok().as_deref() != Some(design_hash.as_str()) {
            if cell_dir.exists() {
                std::fs::remove_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;
            }
            ensure_parent(&stamp)?;
            std::fs::write(&stamp, &design_hash).map_err(|e| Error::io(&stamp, e))?;
        }
        let todo: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !cell_path(i, j).exists())
            .collect();
        info!("validation: {} of {} cells to solve", todo.len(), n * n);
        let solver = self.config.solver.highs();
        let tol = self.config.solver.tolerance;
        todo.par_iter().try_for_each(|&(i, j)| {
            let cell = validate_entry(net, &designs[i], &years[j], &solver, tol)
                .unwrap_or_else(|e| Cell::Poisoned { reason: e.to_string() });
            write_json(&cell_path(i, j), &cell)
        })?;
        let mut matrix = ValidationMatrix::pending(years.iter().map(|y| y.label.clone()).collect());
        for i in 0..n {
            for j in 0..n {
                matrix.cells[i][j] = read_artifact(&cell_path(i, j), Step::Validate)?;
                outputs.push(cell_path(i, j));
            }
        }
        outputs.push(stamp);
        let path = self.dir.join("validation_matrix.csv");
        write_matrix_csv(create(&path)?, &matrix)?;
        outputs.push(path);
        let path = self.dir.join("validation.json");
        write_json(&path, &matrix)?;
        outputs.push(path);
        let poisoned = matrix
            .cells
            .iter()
            .flatten()
            .filter(|c| matches!(c, Cell::Poisoned { .. }))
            .count();
        if poisoned > 0 {
            return Err(Error::Solver(format!(
                "{poisoned} validation cells did not solve; see {}",
                self.dir.join("validation_matrix.csv").display()
            )));
        }
        let aggregates = aggregate_rows_cols(&matrix)?;
        let path = self.dir.join("validation_aggregates.csv");
        write_aggregates_csv(create(&path)?, &matrix.years, &aggregates)?;
        outputs.push(path);
        Ok(Outcome::done(outputs))
    }

    fn similarity(&self) -> Result<Outcome> {
        let net = &self.config.network;
        let years = self.load_weather()?;
        let solutions = self.load_solutions(&years)?;
        let labels: Vec<String> = years.iter().map(|y| y.label.clone()).collect();
        let mut outputs = Vec::new();
        let mut notes = Vec::new();
        if years.len() < 2 {
            return Ok(Outcome {
                outputs,
                status: StepStatus::Skipped,
                note: Some("similarity needs at least two weather years".into()),
            });
        }
        for q in [SimilarityQuantity::NetLoad, SimilarityQuantity::WindCf] {
            let samples: Result<Vec<Vec<f64>>> = years
                .iter()
                .zip(&solutions)
                .map(|(y, s)| daily_quantity(q, net, y, s))
                .collect();
            let samples = match samples {
                Ok(s) => s,
                Err(Error::MissingInput(msg)) => {
                    notes.push(format!("{}: {msg}", q.as_str()));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let sim = similarity_matrix(q, labels.clone(), &samples)?;
            let path = self.dir.join(format!("similarity_{}.csv", q.as_str().replace('-', "_")));
            write_similarity_csv(create(&path)?, &sim)?;
            outputs.push(path);
        }
        Ok(Outcome {
            outputs,
            status: StepStatus::Done,
            note: (!notes.is_empty()).then(|| notes.join("; ")),
        })
    }

    fn report(&self) -> Result<Outcome> {
        let net = &self.config.network;
        let years = self.load_weather()?;
        let solutions = self.load_solutions(&years)?;
        let events = self.load_events()?;
        let clusters: ClusterArtifact = read_artifact(&self.dir.join("cluster.json"), Step::Cluster)?;
        let matrix: ValidationMatrix = read_artifact(&self.dir.join("validation.json"), Step::Validate)?;
        let aggregates = aggregate_rows_cols(&matrix)?;
        let metrics: Vec<YearMetrics> = years
            .iter()
            .zip(&solutions)
            .map(|(y, s)| YearMetrics::compute(net, y, s, net.scenario.sde_window_hours))
            .collect::<Result<_>>()?;
        let report = build_report(&ReportInputs {
            years: &metrics,
            aggregates: Some(&aggregates),
            events: &events,
            event_types: &clusters.event_types,
        })?;
        let mut outputs = Vec::new();
        let path = self.dir.join("report.csv");
        write_report_csv(create(&path)?, &report)?;
        outputs.push(path);
        let path = self.dir.join("report_ranks.csv");
        write_ranks_csv(create(&path)?, &report)?;
        outputs.push(path);

        let mut shares = Vec::new();
        for (y, sol) in years.iter().zip(&solutions) {
            let own: Vec<SdeEvent> = events.iter().filter(|e| e.weather_year == y.label).cloned().collect();
            let share = sde_cost_share(sol, net, &own);
            let path = self.year_path(&y.label, "cost_share.csv");
            write_cost_share_csv(create(&path)?, &share)?;
            outputs.push(path);
            shares.push((y.label.clone(), share));
        }

        #[derive(Serialize)]
        struct MetricInfo {
            name: &'static str,
            definition: &'static str,
            severe_when: &'static str,
        }
        #[derive(Serialize)]
        struct ReportJson<'a> {
            metrics: Vec<MetricInfo>,
            report: &'a adequacy_core::resilience::ResilienceReport,
            cost_shares: IndexMap<String, adequacy_core::resilience::CostShare>,
            cluster_note: Option<String>,
        }
        let json = ReportJson {
            metrics: Metric::ALL
                .iter()
                .map(|m| MetricInfo {
                    name: m.name(),
                    definition: m.definition(),
                    severe_when: if m.higher_is_severe() { "high" } else { "low" },
                })
                .collect(),
            report: &report,
            cost_shares: shares.into_iter().collect(),
            cluster_note: clusters.skipped,
        };
        let path = self.dir.join("report.json");
        write_json(&path, &json)?;
        outputs.push(path);
        Ok(Outcome::done(outputs))
    }

    fn sweep(&self) -> Result<Outcome> {
        let axes = &self.config.sweep.axes;
        if axes.is_empty() {
            return Err(Error::Config("sweep needs at least one axis under [sweep]".into()));
        }
        let reference = self.load_events()?;
        let years = self.load_weather()?;
        let mut outputs = Vec::new();
        let mut rows = Vec::new();
        for axis in axes {
            for &value in &axis.values {
                let mut scenario = self.config.network.scenario.clone();
                axis.parameter.apply(&mut scenario, value);
                let network = adequacy_core::apply_scenario(&self.config.network, &scenario)?;
                let name = format!("{}={}", axis.parameter.as_str(), value);
                let sdir = self.dir.join("sweep").join(name.replace('=', "-"));
                let solutions = if axis.parameter.needs_solve() {
                    outputs.extend(self.solve_into(&network, &sdir, &years)?);
                    years
                        .iter()
                        .map(|y| read_artifact(&sdir.join(year_dir(&y.label)).join("solution.json"), Step::Sweep))
                        .collect::<Result<_>>()?
                } else {
                    self.load_solutions(&years)?
                };
                let mut levels = Vec::new();
                for &m in &self.ladder {
                    let config = SdeConfig {
                        threshold: scenario.sde_threshold * m,
                        ..SdeConfig::from_scenario(&scenario)
                    };
                    levels.push((m, config.threshold, self.detect_all(&network, &years, &solutions, &config)?));
                }
                let ladder: Vec<_> = levels
                    .iter()
                    .map(|(_, t, ev)| adequacy_core::events::LadderLevel {
                        threshold: *t,
                        events: ev,
                    })
                    .collect();
                let matched = adequacy_core::events::highest_matching_threshold(&reference, &ladder);
                for (ev, m) in reference.iter().zip(matched) {
                    rows.push(SweepRow {
                        scenario: name.clone(),
                        parameter: axis.parameter.as_str().to_string(),
                        value,
                        event_id: ev.id,
                        weather_year: ev.weather_year.clone(),
                        matched_threshold: m,
                        matched_multiplier: m.map(|t| {
                            levels
                                .iter()
                                .find(|(_, lt, _)| *lt == t)
                                .map_or(f64::NAN, |(mult, _, _)| *mult)
                        }),
                    });
                }
            }
        }
        let path = self.dir.join("sweep.csv");
        write_sweep_csv(create(&path)?, &rows)?;
        outputs.push(path);
        Ok(Outcome::done(outputs))
    }
}

fn flush<W: std::io::Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// One row per event with its spans (hour of the weather year, inclusive)
/// and cluster features.
pub fn write_events_csv<W: std::io::Write>(writer: W, events: &[SdeEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "event_id",
        "weather_year",
        "raw_start",
        "raw_end",
        "start",
        "end",
        "peak_hour",
        "cost_eur",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(adequacy_core::events::EventFeatures::NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for e in events {
        let mut row = vec![
            e.id.to_string(),
            e.weather_year.clone(),
            e.raw.start.to_string(),
            e.raw.end.to_string(),
            e.span.start.to_string(),
            e.span.end.to_string(),
            e.peak_hour.to_string(),
            e.cost.to_string(),
        ];
        row.extend(e.features.to_array().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    flush(w)
}

/// Per event and bus: anomalies (MW or EUR/MWh), prices and utilisation.
pub fn write_composites_csv<W: std::io::Write>(writer: W, events: &[SdeEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "event_id",
        "bus",
        "solar_anomaly_mw",
        "wind_anomaly_mw",
        "net_load_anomaly_mw",
        "price_anomaly_eur_per_mwh",
        "avg_price_eur_per_mwh",
        "avg_hourly_cost_eur",
        "utilisation_existing_dispatch",
        "utilisation_daily_balancing",
        "utilisation_resilience_backup",
    ])?;
    for e in events {
        for c in &e.composites {
            let util = |cat| c.utilisation.get(&cat).map_or(String::new(), |v: &f64| v.to_string());
            w.write_record([
                e.id.to_string(),
                c.bus.clone(),
                c.solar_anomaly.to_string(),
                c.wind_anomaly.to_string(),
                c.net_load_anomaly.to_string(),
                c.price_anomaly.to_string(),
                c.avg_price.to_string(),
                c.avg_hourly_cost.to_string(),
                util(adequacy_core::FlexCategory::ExistingDispatch),
                util(adequacy_core::FlexCategory::DailyBalancing),
                util(adequacy_core::FlexCategory::ResilienceBackup),
            ])?;
        }
    }
    flush(w)
}

fn write_event_types_csv<W: std::io::Write>(writer: W, events: &[SdeEvent], art: &ClusterArtifact) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["event_id", "weather_year", "cluster", "type", "type_name"])?;
    for (i, e) in events.iter().enumerate() {
        let cluster = art.selection.as_ref().map(|s| s.model.labels[i]);
        let t = art.event_types.get(&e.id);
        w.write_record([
            e.id.to_string(),
            e.weather_year.clone(),
            cluster.map_or(String::new(), |c| c.to_string()),
            t.map_or("", |t| t.tag()).to_string(),
            t.map_or("", |t| t.name()).to_string(),
        ])?;
    }
    flush(w)
}

fn write_sweep_csv<W: std::io::Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "scenario",
        "parameter",
        "value",
        "event_id",
        "weather_year",
        "matched_threshold_eur",
        "matched_multiplier",
    ])?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.parameter.clone(),
            r.value.to_string(),
            r.event_id.to_string(),
            r.weather_year.clone(),
            r.matched_threshold.map_or("absent".to_string(), |t| t.to_string()),
            r.matched_multiplier.map_or("absent".to_string(), |m| m.to_string()),
        ])?;
    }
    flush(w)
}
