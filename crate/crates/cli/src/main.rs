use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use eid_cloud::actors::FlowOutcome;
use eid_cloud::audit::{audit_run, AuditError, DisclosurePolicy, Registry, Verdict};
use eid_cloud::compare::{compare, render_comparison};
use eid_cloud::harness::{run_sessions, RunOutput};
use eid_cloud::pre::{re_decrypt, re_encrypt, re_keygen, re_reencrypt, re_rkgen, re_setup_seeded, Backend, SECURITY_LEVEL};
use eid_cloud::redactable::{rs_keygen, rs_redact, rs_sign, rs_verify, Block, BlockMessage};
use eid_cloud::scenario::{Mode, Scenario, UseCase};
use eid_cloud::world::{sra_setup, write_atomic, World};

/// Exit statuses.
mod exit {
    pub const OK: u8 = 0;
    pub const AUDIT_FAILED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const ABORTED: u8 = 3;
    pub const DENIED: u8 = 4;
    pub const REFUSED: u8 = 5;
}

#[derive(Parser)]
#[command(name = "eidcloud", version, about = "Cloud eID model: setup, flows, privacy audit")]
struct Cli {
    /// Output directory; the world lives in <out>/world.
    #[arg(long, global = true, env = "EIDCLOUD_OUT", default_value = "eidcloud-out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate keys, cards and registers for a scenario.
    Setup {
        /// Scenario file (TOML). The built-in default scenario if omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "pairing")]
        backend: Backend,
    },
    /// Run the sessions of one use case and write trace, logs and outcomes.
    Run(RunArgs),
    /// Run one use case and audit the cloud observers.
    Audit(RunArgs),
    /// Run and audit all six combinations and print the comparison table.
    Compare(WorldArgs),
    /// Sign, redact and verify a block message.
    DemoRs {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Encrypt and re-encrypt a payload over three hops.
    DemoPre {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "pairing")]
        backend: Backend,
    },
}

#[derive(Args)]
struct WorldArgs {
    /// World directory written by `setup` (default: <out>/world).
    #[arg(long)]
    world: Option<PathBuf>,
    /// Session seed; defaults to the setup seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long)]
    use_case: UseCase,
    #[arg(long)]
    mode: Mode,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self {
            code: exit::USAGE,
            message: e.to_string(),
        }
    }
}

impl From<AuditError> for Failure {
    fn from(e: AuditError) -> Self {
        let code = match e {
            AuditError::Refused(_) => exit::REFUSED,
            _ => exit::USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Res = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Setup {
            scenario,
            seed,
            backend,
        } => setup(&cli.out, scenario.as_deref(), seed, backend),
        Cmd::Run(a) => run(&cli.out, &a),
        Cmd::Audit(a) => audit(&cli.out, &a),
        Cmd::Compare(a) => compare_all(&cli.out, &a),
        Cmd::DemoRs { seed } => demo_rs(seed),
        Cmd::DemoPre { seed, backend } => demo_pre(seed, backend),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    write_atomic(path, bytes.as_ref()).map_err(Failure::usage)
}

fn setup(out: &Path, scenario: Option<&Path>, seed: u64, backend: Backend) -> Res {
    let s = match scenario {
        Some(p) => Scenario::load(p).map_err(Failure::usage)?,
        None => Scenario::default_scenario(),
    };
    let world = sra_setup(&s, seed, backend).map_err(Failure::usage)?;
    let dir = out.join("world");
    world.save(&dir).map_err(Failure::usage)?;
    println!(
        "world {:?} (seed {seed}, {backend} backend): {} actors, {} sessions -> {}",
        s.name,
        world.rings.len(),
        s.sessions.len(),
        dir.display()
    );
    if !backend.is_sound() {
        println!("note: the test-double backend holds every key; audit and compare will refuse this world");
    }
    Ok(exit::OK)
}

fn load_world(out: &Path, a: &WorldArgs) -> Result<World, Failure> {
    let dir = a.world.clone().unwrap_or_else(|| out.join("world"));
    let mut w = World::load(&dir).map_err(Failure::usage)?;
    if let Some(seed) = a.seed {
        w.directory.seed = seed;
    }
    Ok(w)
}

fn run_one(out: &Path, a: &RunArgs) -> Result<(World, RunOutput, PathBuf), Failure> {
    let mut world = load_world(out, &a.world)?;
    let sessions = world.scenario.sessions_for(a.use_case);
    if sessions.is_empty() {
        return Err(Failure::usage(format!("the scenario has no {} session", a.use_case)));
    }
    let pristine = world.clone();
    let run = run_sessions(&mut world, &sessions, a.mode);
    let dir = out.join("runs").join(format!("{}-{}", a.use_case, a.mode));
    write_run(&dir, &run)?;
    Ok((pristine, run, dir))
}

fn write_run(dir: &Path, run: &RunOutput) -> Result<(), Failure> {
    write(&dir.join("trace.jsonl"), run.trace_jsonl())?;
    write(&dir.join("observations.jsonl"), run.logs_jsonl())?;
    write(&dir.join("outcomes.jsonl"), run.outcomes_jsonl())
}

/// Exit status for a set of session outcomes: aborts win over denials.
fn outcome_code(run: &RunOutput) -> u8 {
    let outcomes: Vec<&FlowOutcome> = run.sessions.iter().map(|s| &s.outcome).collect();
    if outcomes.iter().any(|o| matches!(o, FlowOutcome::Aborted { .. })) {
        exit::ABORTED
    } else if outcomes.iter().any(|o| matches!(o, FlowOutcome::Denied { .. })) {
        exit::DENIED
    } else {
        exit::OK
    }
}

fn print_outcomes(run: &RunOutput) {
    for s in &run.sessions {
        println!("{} {} {} at {}: {}", s.session, s.use_case, s.subject, s.sp, s.outcome);
        if let Some(id) = s.outcome.identity() {
            for (k, v) in id {
                let shown = match std::str::from_utf8(v) {
                    Ok(t) if k != "ssPIN" && k != "mandate" => t.to_owned(),
                    _ => hex::encode(v),
                };
                println!("    {k} = {shown}");
            }
        }
    }
}

fn run(out: &Path, a: &RunArgs) -> Res {
    let (_, run, dir) = run_one(out, a)?;
    print_outcomes(&run);
    println!(
        "{} envelopes ({} delivered, {} rejected) -> {}",
        run.trace.sent(),
        run.trace.delivered(),
        run.trace.rejected(),
        dir.display()
    );
    Ok(outcome_code(&run))
}

fn audit(out: &Path, a: &RunArgs) -> Res {
    let backend = load_world(out, &a.world)?.backend();
    if !backend.is_sound() {
        return Err(AuditError::Refused(backend).into());
    }
    let (world, run, dir) = run_one(out, a)?;
    let report = audit_run(&run, &Registry::from_world(&world), &DisclosurePolicy::for_run(a.use_case, a.mode))?;
    write(
        &dir.join("audit.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    print_outcomes(&run);
    for r in &report.actors {
        let seen: Vec<&str> = r.observed.iter().map(|c| c.label()).collect();
        println!(
            "{:<7} {:?}: {}",
            r.actor,
            r.verdict,
            if seen.is_empty() { "-".to_owned() } else { seen.join(", ") }
        );
        for (c, why) in &r.annotations {
            println!("        note: {c}: {why}");
        }
        for v in &r.violations {
            println!("        violation at step {} ({}): {} in field {}", v.step, v.session, v.category, v.field);
        }
    }
    println!("verdict: {:?}", report.verdict);
    Ok(match report.verdict {
        Verdict::Pass => outcome_code(&run),
        Verdict::Fail => exit::AUDIT_FAILED,
    })
}

fn compare_all(out: &Path, a: &WorldArgs) -> Res {
    let world = load_world(out, a)?;
    if !world.backend().is_sound() {
        return Err(AuditError::Refused(world.backend()).into());
    }
    let c = compare(&world)?;
    let table = render_comparison(&c.reports).map_err(Failure::usage)?;
    let dir = out.join("compare");
    for run in &c.runs {
        let u = run.sessions.first().map(|s| s.use_case.as_str()).unwrap_or("none");
        write_run(&dir.join(format!("{u}-{}", run.mode)), run)?;
    }
    write(&dir.join("table.txt"), &table)?;
    write(&dir.join("reports.json"), c.reports_json())?;
    print!("{table}");
    println!("verdict: {:?}", c.verdict());
    Ok(match c.verdict() {
        Verdict::Pass => exit::OK,
        Verdict::Fail => exit::AUDIT_FAILED,
    })
}

fn demo_rs(seed: u64) -> Res {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let kp = rs_keygen("demo", Some(seed));
    let blocks = ["name=Jane Doe", "date_of_birth=1990-01-01", "ssPIN:tax=<ciphertext>", "ssPIN:health=<ciphertext>"];
    let m = BlockMessage::new(blocks.iter().map(|b| b.as_bytes().to_vec()));
    let sig = rs_sign(&kp.sk, &m, &mut rng).map_err(Failure::usage)?;
    println!("signed {} blocks: verify = {}", m.len(), rs_verify(&kp.pk, &m, &sig));
    let (m2, sig2) = rs_redact(&m, &kp.pk, &sig, &[1, 4]).map_err(Failure::usage)?;
    for (i, b) in m2.blocks().iter().enumerate() {
        match b {
            Block::Visible(c) => println!("  block {}: {}", i + 1, String::from_utf8_lossy(c)),
            Block::Redacted => println!("  block {}: (redacted)", i + 1),
        }
    }
    println!("redacted blocks 1 and 4: verify = {}", rs_verify(&kp.pk, &m2, &sig2));
    let mut tampered: Vec<Block> = m2.blocks().to_vec();
    tampered[1] = Block::Visible(b"date_of_birth=1990-01-02".to_vec());
    let ok = rs_verify(&kp.pk, &BlockMessage::from_blocks(tampered), &sig2);
    println!("tampered block 2: verify = {ok}");
    Ok(exit::OK)
}

fn demo_pre(seed: u64, backend: Backend) -> Res {
    let e = Failure::usage;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (params, msk) = re_setup_seeded("SRA", SECURITY_LEVEL, 4, backend, seed).map_err(e)?;
    let ids = ["A", "B", "C", "D"];
    let keys: Vec<_> = ids.iter().map(|id| re_keygen(&msk, id)).collect::<Result<_, _>>().map_err(e)?;
    let payload = b"ssPIN for sector tax";
    let mut c = re_encrypt(&params, ids[0], payload, &mut rng).map_err(e)?;
    println!("{backend} backend, encrypted to {} (level {})", c.target_id(), c.level());
    for hop in 0..3 {
        let rk = re_rkgen(&params, &keys[hop], ids[hop], ids[hop + 1], &mut rng).map_err(e)?;
        c = re_reencrypt(&c, &rk, &mut rng).map_err(e)?;
        println!("  re-encrypted {} -> {} (level {})", ids[hop], ids[hop + 1], c.level());
    }
    let m = re_decrypt(&keys[3], &c).map_err(e)?;
    println!("D decrypts: {:?}", String::from_utf8_lossy(&m));
    println!("A decrypts D's ciphertext: {}", if re_decrypt(&keys[0], &c).is_ok() { "yes" } else { "rejected" });
    Ok(exit::OK)
}
