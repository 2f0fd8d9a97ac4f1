use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use puflab::attacks::{attack_reliability_es, harness_min_crps, AttackKind, EsConfig, HarnessConfig, HarnessRow};
use puflab::compose::{sample_puf, DesignSpec, PufKind, PufModel};
use puflab::crpgen::{
    generate_dataset_reported, read_dataset, read_model, select_dataset, write_dataset, write_dataset_csv, write_model,
    CrpDataset, GenOptions,
};
use puflab::delay::DelayModuleSpec;
use puflab::error::PufError;
use puflab::hwcost::{self, CostModel, HardwareReport};
use puflab::metrics::{dataset_metrics, reliability_protocol, MetricsReport, ProtocolConfig};
use puflab::preselect::SelectionReport;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::emit::{self, Format};
use crate::{Cli, Command, DesignArgs, Fail};

struct Ctx {
    cfg: ExperimentConfig,
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
}

impl Ctx {
    fn out_path(&self) -> Option<PathBuf> {
        self.out.clone().or_else(|| self.cfg.output.path.as_ref().map(PathBuf::from))
    }

    fn require_out(&self, what: &str) -> Result<PathBuf, Fail> {
        self.out_path().ok_or_else(|| Fail::config(format!("{what} needs --out (or output.path in the config)")))
    }

    /// Write a report to `--out` if given, stdout otherwise.
    fn emit(&self, text: &str) -> Result<(), Fail> {
        match self.out_path() {
            Some(p) => fs::write(&p, text).map_err(|e| Fail::config(format!("write {}: {e}", p.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<u8, Fail> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Fail::config("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Fail::config(format!("worker pool: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::defaults(),
    };
    let seed = cli.seed.or(cfg.simulation.seed).unwrap_or(0);
    let ctx = Ctx { cfg, seed, out: cli.out, format: cli.format };
    match cli.command {
        Command::Instance { design } => instance(ctx, &design),
        Command::Gen { model, count, repeats, preselect, eval_noise, lcg_a, lcg_g, csv } => {
            gen(ctx, &model, count, repeats, preselect, eval_noise, (lcg_a, lcg_g), csv.as_deref())
        }
        Command::Select { model, input, repeats, eval_noise, csv } => {
            select(ctx, &model, &input, repeats, eval_noise, csv.as_deref())
        }
        Command::Metrics { input, model, ber, count, repeats, preselect, eval_noise } => {
            metrics(ctx, input.as_deref(), &model, ber, ProtocolConfig { challenge_count: count, repeats, seed, preselect, eval_noise })
        }
        Command::Attack { attack, design, schedule, cap, instances, test_size, max_epochs, resume, input, model } => {
            let a = AttackArgs { attack, design, schedule, cap, instances, test_size, max_epochs, resume, input, model };
            attack_cmd(ctx, a)
        }
        Command::Hwcost { paper_table, preset, designs, ge_mux, ge_arbiter, ge_gate } => {
            hwcost_cmd(ctx, paper_table, preset.as_deref(), &designs, (ge_mux, ge_arbiter, ge_gate))
        }
        Command::Report { model, count, repeats } => report(ctx, &model, count, repeats),
    }
}

fn apply_design(cfg: &mut ExperimentConfig, a: &DesignArgs) {
    let d = &mut cfg.design;
    d.kind = a.kind.unwrap_or(d.kind);
    d.k = a.k.unwrap_or(if d.kind == PufKind::Apuf { 1 } else { d.k });
    d.n = a.n.unwrap_or(d.n);
    let m = &mut cfg.module;
    m.gate_kind = a.gate_kind.unwrap_or(m.gate_kind);
    m.gate_count = a.gate_count.unwrap_or(m.gate_count);
    m.gate_delay = a.gate_delay.or(m.gate_delay);
    let s = &mut cfg.simulation;
    s.weight_sigma = a.weight_sigma.unwrap_or(s.weight_sigma);
    s.noise_sigma = a.noise_sigma.or(s.noise_sigma);
}

fn load_model(path: &Path) -> Result<(DesignSpec, PufModel), Fail> {
    let f = File::open(path).map_err(|e| Fail::missing(format!("model {}: {e}", path.display())))?;
    read_model(&mut BufReader::new(f)).map_err(|e| Fail::missing(format!("model {}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<CrpDataset, Fail> {
    let f = File::open(path).map_err(|e| Fail::missing(format!("dataset {}: {e}", path.display())))?;
    read_dataset(&mut BufReader::new(f)).map_err(|e| Fail::missing(format!("dataset {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Fail> {
    File::create(path).map(BufWriter::new).map_err(|e| Fail::config(format!("create {}: {e}", path.display())))
}

fn save_dataset(d: &CrpDataset, out: &Path, csv: Option<&Path>) -> Result<(), Fail> {
    let mut w = create(out)?;
    write_dataset(d, &mut w)?;
    w.flush().map_err(write_err)?;
    if let Some(p) = csv {
        let mut w = create(p)?;
        write_dataset_csv(d, &mut w)?;
        w.flush().map_err(write_err)?;
    }
    Ok(())
}

fn write_err(e: std::io::Error) -> Fail {
    Fail::config(format!("write: {e}"))
}

#[derive(Serialize)]
struct InstanceRecord {
    kind: PufKind,
    k: usize,
    n: usize,
    gate_count: u32,
    total_delay: f64,
    weight_sigma: f64,
    noise_sigma: f64,
    seed: u64,
}

fn instance(mut ctx: Ctx, a: &DesignArgs) -> Result<u8, Fail> {
    apply_design(&mut ctx.cfg, a);
    let design = ctx.cfg.design()?;
    let noise = ctx.cfg.noise_sigma();
    let ws = ctx.cfg.simulation.weight_sigma;
    let model = sample_puf(&design, ws, noise, ctx.seed)?;
    let out = ctx.require_out("instance")?;
    let mut w = create(&out)?;
    write_model(&design, &model, &mut w)?;
    w.flush().map_err(write_err)?;
    let rec = InstanceRecord {
        kind: design.kind,
        k: design.k,
        n: design.n,
        gate_count: design.module.gate_count,
        total_delay: design.module.total_delay(),
        weight_sigma: ws,
        noise_sigma: noise,
        seed: ctx.seed,
    };
    print!("{}", emit::document(&[rec], ctx.format)?);
    Ok(0)
}

/// Selection outcome; `component` is set for the per-component CDC rows.
#[derive(Serialize)]
struct SelectionRecord {
    component: Option<usize>,
    generated: u64,
    selected: u64,
    rate: f64,
    std_error: f64,
    records: usize,
}

fn selection_records(kind: PufKind, reports: &[SelectionReport], records: usize) -> Vec<SelectionRecord> {
    reports
        .iter()
        .enumerate()
        .map(|(j, r)| SelectionRecord {
            component: (kind == PufKind::Cdc).then_some(j),
            generated: r.generated,
            selected: r.selected,
            rate: r.rate,
            std_error: r.std_error(),
            records,
        })
        .collect()
}

#[derive(Serialize)]
struct GenRecord {
    generated: u64,
    records: usize,
    repeats: u32,
}

#[allow(clippy::too_many_arguments)]
fn gen(
    ctx: Ctx,
    model: &Path,
    count: Option<u64>,
    repeats: Option<u32>,
    preselect: bool,
    eval_noise: Option<f64>,
    lcg: (Option<u64>, Option<u64>),
    csv: Option<&Path>,
) -> Result<u8, Fail> {
    let (design, m) = load_model(model)?;
    let g = &ctx.cfg.generation;
    let mut ov = ctx.cfg.lcg();
    ov.a = lcg.0.or(ov.a);
    ov.g = lcg.1.or(ov.g);
    let opts = GenOptions {
        repeats: repeats.unwrap_or(g.repeats),
        preselect,
        lcg: ov,
        eval_noise: eval_noise.or(g.eval_noise),
        ..GenOptions::new(count.unwrap_or(g.count), ctx.seed)
    };
    let (d, reports) = generate_dataset_reported(&m, &design.module, &opts)?;
    save_dataset(&d, &ctx.require_out("gen")?, csv)?;
    let text = if preselect {
        emit::document(&selection_records(m.kind(), &reports, d.len()), ctx.format)?
    } else {
        emit::document(&[GenRecord { generated: opts.count, records: d.len(), repeats: opts.repeats }], ctx.format)?
    };
    print!("{text}");
    Ok(0)
}

fn select(ctx: Ctx, model: &Path, input: &Path, repeats: Option<u32>, eval_noise: Option<f64>, csv: Option<&Path>) -> Result<u8, Fail> {
    let (design, m) = load_model(model)?;
    let d = load_dataset(input)?;
    let g = &ctx.cfg.generation;
    let (sel, reports) =
        select_dataset(&m, &design.module, &d, ctx.seed, repeats.unwrap_or(g.repeats), eval_noise.or(g.eval_noise))?;
    save_dataset(&sel, &ctx.require_out("select")?, csv)?;
    print!("{}", emit::document(&selection_records(m.kind(), &reports, sel.len()), ctx.format)?);
    Ok(0)
}

fn metrics(ctx: Ctx, input: Option<&Path>, models: &[PathBuf], want_ber: bool, pc: ProtocolConfig) -> Result<u8, Fail> {
    let report: MetricsReport = match (input, models) {
        (Some(p), _) => {
            let d = load_dataset(p)?;
            if want_ber && !d.has_repeats() {
                return Err(Fail::config(format!(
                    "{} stores no repeated evaluations, so BER cannot be measured; regenerate it with `gen --repeats R`",
                    p.display()
                )));
            }
            dataset_metrics(&d)?
        }
        (None, [first, rest @ ..]) => {
            let (design, m) = load_model(first)?;
            let peers = rest.iter().map(|p| load_model(p).map(|x| x.1)).collect::<Result<Vec<_>, _>>()?;
            reliability_protocol(&m, &design.module, &pc, &peers)?
        }
        (None, []) => return Err(Fail::config("metrics needs --input DATASET or at least one --model")),
    };
    ctx.emit(&emit::document(&[report], ctx.format)?)?;
    Ok(0)
}

pub struct AttackArgs {
    attack: Option<AttackKind>,
    design: DesignArgs,
    schedule: Option<Vec<u64>>,
    cap: Option<u64>,
    instances: Option<usize>,
    test_size: Option<u64>,
    max_epochs: Option<u32>,
    resume: bool,
    input: Option<PathBuf>,
    model: Option<PathBuf>,
}

/// One harness row as streamed; wall time is left out so reruns match.
#[derive(Serialize)]
struct AttackRow<'a> {
    attack: AttackKind,
    kind: PufKind,
    k: usize,
    n: usize,
    #[serde(flatten)]
    row: &'a HarnessRow,
    /// `running`, `broken` (success fraction reached) or `failed` (cap reached).
    status: &'static str,
}

#[derive(Serialize)]
struct EsRecord {
    attack: AttackKind,
    training_size: u64,
    test_accuracy: f64,
    generations: u32,
    success: bool,
    degenerate: bool,
    fitness: Option<f64>,
    weight_correlation: Option<f64>,
}

fn read_completed(path: &Path) -> Result<Vec<HarnessRow>, Fail> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Fail::missing(format!("resume {}: {e}", path.display()))),
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Fail::config(format!("resume {}: {e}", path.display()))))
        .collect()
}

fn attack_cmd(mut ctx: Ctx, a: AttackArgs) -> Result<u8, Fail> {
    let kind = a.attack.unwrap_or(ctx.cfg.attack.kind);
    if kind == AttackKind::Es {
        return attack_es(&ctx, a.input.as_deref(), a.model.as_deref());
    }
    apply_design(&mut ctx.cfg, &a.design);
    let design = ctx.cfg.design()?;
    let ac = &ctx.cfg.attack;
    let mut hc = HarnessConfig::new(kind, a.schedule.unwrap_or_else(|| ac.schedule.clone()), a.cap.unwrap_or(ac.cap), ctx.seed);
    hc.instances = a.instances.unwrap_or(ac.instances);
    hc.test_size = a.test_size.unwrap_or(ac.test_size);
    hc.weight_sigma = ctx.cfg.simulation.weight_sigma;
    // attacks run noiseless unless noise is asked for explicitly
    hc.noise_sigma = ctx.cfg.simulation.noise_sigma.unwrap_or(0.0);
    if let Some(e) = a.max_epochs {
        hc.lr.max_epochs = e;
        hc.nn.max_epochs = e;
    }
    let last = hc.schedule.iter().copied().filter(|&s| s <= hc.cap).max();

    let out = ctx.out_path();
    if a.resume && (out.is_none() || ctx.format != Format::Json) {
        return Err(Fail::config("--resume needs --out and --format json"));
    }
    let completed = match (&out, a.resume) {
        (Some(p), true) => read_completed(p)?,
        _ => Vec::new(),
    };
    let mut sink: Box<dyn Write> = match &out {
        Some(p) if a.resume => Box::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Fail::config(format!("open {}: {e}", p.display())))?,
        ),
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut failure = None;
    let mut header_done = !completed.is_empty();
    let outcome = harness_min_crps(&design, &hc, &completed, &mut |row| {
        let status = if row.success_rate >= hc.success_fraction {
            "broken"
        } else if Some(row.size) == last {
            "failed"
        } else {
            "running"
        };
        let rec = AttackRow { attack: kind, kind: design.kind, k: design.k, n: design.n, row, status };
        let mut text = String::new();
        if ctx.format == Format::Csv && !header_done {
            match emit::csv_header(&rec) {
                Ok(h) => text += &h,
                Err(e) => failure = Some(e),
            }
            header_done = true;
        }
        match emit::line(&rec, ctx.format) {
            Ok(l) => text += &l,
            Err(e) => failure = Some(e),
        }
        if let Err(e) = sink.write_all(text.as_bytes()).and_then(|_| sink.flush()) {
            failure = Some(Fail::config(format!("write: {e}")));
        }
    })?;
    if let Some(f) = failure {
        return Err(f);
    }
    match outcome.min_size {
        Some(s) => eprintln!("{kind}: success fraction reached at {s} CRPs"),
        None => eprintln!("{kind}: cap of {} CRPs reached without breaking the design", hc.cap),
    }
    let diverged = outcome.rows.iter().any(|r| r.diverged > 0);
    Ok(if outcome.failed_at_cap && diverged { Fail::DIVERGED } else { 0 })
}

fn attack_es(ctx: &Ctx, input: Option<&Path>, truth: Option<&Path>) -> Result<u8, Fail> {
    let input = input.ok_or_else(|| Fail::config("the es attack needs --input DATASET"))?;
    let d = load_dataset(input)?;
    let truth = truth.map(load_model).transpose()?.map(|x| x.1);
    let out = attack_reliability_es(&d, &EsConfig { seed: ctx.seed, ..EsConfig::default() }, truth.as_ref())?;
    let rec = EsRecord {
        attack: AttackKind::Es,
        training_size: out.result.training_size,
        test_accuracy: out.result.test_accuracy,
        generations: out.result.epochs,
        success: out.result.success,
        degenerate: out.degenerate,
        fitness: out.fitness,
        weight_correlation: out.result.weight_correlation.as_ref().map(|v| v[0]),
    };
    ctx.emit(&emit::document(&[rec], ctx.format)?)?;
    Ok(0)
}

fn parse_design(s: &str, module: DelayModuleSpec) -> Result<DesignSpec, Fail> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Fail::config(format!("design {s:?}: expected kind:k:n, e.g. xor:4:64"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let kind = match parts[0].to_ascii_lowercase().as_str() {
        "apuf" => PufKind::Apuf,
        "xor" => PufKind::Xor,
        "cdc" => PufKind::Cdc,
        _ => return Err(bad()),
    };
    let k = parts[1].parse().map_err(|_| bad())?;
    let n = parts[2].parse().map_err(|_| bad())?;
    Ok(DesignSpec::new(kind, k, n, module)?)
}

fn hwcost_cmd(ctx: Ctx, builtin: bool, preset: Option<&str>, designs: &[String], ge: (f64, f64, f64)) -> Result<u8, Fail> {
    let cm = CostModel::new(ge.0, ge.1, ge.2)?;
    let builtin = match preset {
        Some("paper") => true,
        Some(other) => return Err(Fail::config(format!("unknown preset {other:?} (known: paper)"))),
        None => builtin,
    };
    let rows: Vec<HardwareReport> = if builtin {
        hwcost::reference_table(&cm)
    } else if designs.is_empty() {
        hwcost::compare_designs(&[ctx.cfg.design()?], &cm, &[])?
    } else {
        let module = ctx.cfg.module()?;
        let ds = designs.iter().map(|s| parse_design(s, module)).collect::<Result<Vec<_>, _>>()?;
        hwcost::compare_designs(&ds, &cm, &[])?
    };
    let text = match ctx.format {
        Format::Text => hwcost::to_text(&rows),
        Format::Csv => hwcost::to_csv(&rows),
        Format::Json => emit::document(&rows, Format::Json)?,
    };
    ctx.emit(&text)?;
    Ok(0)
}

#[derive(Serialize)]
struct ReportRecord {
    kind: PufKind,
    k: usize,
    n: usize,
    gate_count: u32,
    total_delay: f64,
    noise_sigma: f64,
    ge: f64,
    transmission_bits: u64,
    crp_space_log2: u64,
    challenges: u64,
    repeats: u32,
    ber_unfiltered: Option<f64>,
    randomness_p: Option<f64>,
    randomness_h: Option<f64>,
    selection_rate: Option<f64>,
    ber_preselected: Option<f64>,
}

fn report(ctx: Ctx, model: &Path, count: u64, repeats: u32) -> Result<u8, Fail> {
    let (design, m) = load_model(model)?;
    let hw = HardwareReport::new(&design, &CostModel::default());
    let pc = ProtocolConfig { repeats, ..ProtocolConfig::new(count, ctx.seed) };
    let plain = reliability_protocol(&m, &design.module, &pc, &[])?;
    // (selection rate, BER on the selected CRPs); nothing without a module
    let (selection_rate, ber_preselected) = if design.module.total_delay() > 0.0 {
        match reliability_protocol(&m, &design.module, &ProtocolConfig { preselect: true, ..pc }, &[]) {
            Ok(r) => (r.selection_rate, r.ber),
            Err(PufError::EmptyDataset { .. }) => (Some(0.0), None),
            Err(e) => return Err(e.into()),
        }
    } else {
        (None, None)
    };
    let rec = ReportRecord {
        kind: design.kind,
        k: design.k,
        n: design.n,
        gate_count: design.module.gate_count,
        total_delay: design.module.total_delay(),
        noise_sigma: m.components()[0].noise_sigma(),
        ge: hw.ge,
        transmission_bits: hw.transmission_bits,
        crp_space_log2: hw.crp_space_log2,
        challenges: count,
        repeats,
        ber_unfiltered: plain.ber,
        randomness_p: plain.randomness_p,
        randomness_h: plain.randomness_h,
        selection_rate,
        ber_preselected,
    };
    ctx.emit(&emit::document(&[rec], ctx.format)?)?;
    Ok(0)
}
