//! The `catbes` command line.
//!
//! Exit status is 0 whenever a verdict was computed, 1 for usage, parse and
//! input-file errors, and 2 when an engine refused because a cap or bound
//! was exceeded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::basecalc::{check_derivation_atoms, AtomSet, Base, BaseError, BaseFile, Bounds, DerivTerm};
use crate::bes::{self, BesError, Engine, SemanticsMode, ValidityConfig, ValidityReport, Witness};
use crate::category::{self, CategoryError};
use crate::locale::{self, LocaleError, NucleusOp, Poset};
use crate::nj::{self, check_nj, hyp_context, kripke_eval, satisfies_sequent, Decision, KripkeModel, NJTerm};
use crate::schema::{self, SchemaError};
use crate::syntax::{parse_formula_with_negation, render_formula, Atom, Formula, FormulaSet, Sequent};

#[derive(Debug, Parser)]
#[command(name = "catbes", version, about = "Base-extension semantics for intuitionistic propositional logic")]
pub struct Cli {
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for randomized cross-checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sandqvist,
    Kripke,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Brute,
    Prover,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// Atoms quantified over (comma separated); defaults to the input's atoms.
    #[arg(long, value_delimiter = ',')]
    pub universe: Option<Vec<String>>,
    #[arg(long, default_value_t = 2)]
    pub max_premises: usize,
    #[arg(long, default_value_t = 1)]
    pub max_hyps: usize,
    #[arg(long, default_value_t = 2)]
    pub max_extra_rules: usize,
}

impl BoundsArgs {
    fn bounds(&self) -> Bounds {
        Bounds::new(self.max_premises, self.max_hyps, self.max_extra_rules)
    }

    fn universe_or(&self, fallback: AtomSet) -> Result<AtomSet, CliError> {
        match &self.universe {
            None => Ok(fallback),
            Some(names) => names
                .iter()
                .map(|n| Atom::new(n.trim()).map_err(|e| CliError::Usage(e.to_string())))
                .collect(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide NJ derivability, with a proof term or a countermodel.
    Decide { sequent: String },
    /// Validity in base-extension semantics.
    Validate {
        sequent: String,
        #[command(flatten)]
        bounds: BoundsArgs,
        #[arg(long, value_enum, default_value = "sandqvist")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "brute")]
        engine: EngineArg,
        /// Evaluate in this base instead of quantifying over all bases.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Compare derivability in the flattening base N with the NJ verdict.
    Complete { sequent: String },
    /// Kripke-style disjunction (brute force) against Sandqvist validity (prover).
    Compare {
        sequent: String,
        #[command(flatten)]
        bounds: BoundsArgs,
    },
    /// Validity upsets, the nucleus and its closed elements on a poset.
    Locale {
        /// Poset file; without it the poset of bases within bounds is used.
        #[arg(long)]
        poset: Option<PathBuf>,
        #[command(flatten)]
        bounds: BoundsArgs,
        #[arg(long = "formula")]
        formulas: Vec<String>,
    },
    /// Build a fragment of the category of worlds over a base.
    Fragment {
        #[arg(long)]
        base: PathBuf,
        #[command(flatten)]
        bounds: BoundsArgs,
        /// Derivation depth bound.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Largest context size.
        #[arg(long, default_value_t = 0)]
        max_ctx: usize,
        #[arg(long = "formula")]
        formulas: Vec<String>,
    },
    /// Check a proof file: an NJ term, a base derivation or a countermodel.
    CheckProof { file: PathBuf },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Refused(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Refused(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Refused(m) => write!(f, "refused: {m}"),
        }
    }
}

fn base_error(e: BaseError) -> CliError {
    match e {
        BaseError::CapExceeded { .. } | BaseError::UniverseTooLarge { .. } => CliError::Refused(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

impl From<BaseError> for CliError {
    fn from(e: BaseError) -> CliError {
        base_error(e)
    }
}

impl From<BesError> for CliError {
    fn from(e: BesError) -> CliError {
        match e {
            BesError::Base(b) => base_error(b),
            BesError::Nj(n) => CliError::Refused(n.to_string()),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<CategoryError> for CliError {
    fn from(e: CategoryError) -> CliError {
        match e {
            CategoryError::Base(b) => base_error(b),
            e if e.is_cap() => CliError::Refused(e.to_string()),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<LocaleError> for CliError {
    fn from(e: LocaleError) -> CliError {
        match e {
            LocaleError::Base(b) => base_error(b),
            LocaleError::TooLarge { .. } => CliError::Refused(e.to_string()),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<nj::NjError> for CliError {
    fn from(e: nj::NjError) -> CliError {
        CliError::Refused(e.to_string())
    }
}

/// What a run printed and its exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match execute(&cli) {
        Ok(report) => Outcome {
            code: 0,
            stdout: report.render(cli.json),
            stderr: String::new(),
        },
        Err(e) => Outcome {
            code: e.code(),
            stdout: String::new(),
            stderr: format!("{e}\n"),
        },
    }
}

/// A report: JSON plus its human-readable rendering.
pub struct Report {
    pub json: Value,
    pub text: String,
}

impl Report {
    fn render(&self, json: bool) -> String {
        if json {
            let mut s = serde_json::to_string_pretty(&self.json).expect("reports serialize");
            s.push('\n');
            s
        } else {
            self.text.clone()
        }
    }
}

fn parse_sequent(s: &str) -> Result<Sequent, CliError> {
    Sequent::parse_with_negation(s).map_err(|e| CliError::Usage(format!("bad sequent: {e}")))
}

fn parse_formula(s: &str) -> Result<Formula, CliError> {
    parse_formula_with_negation(s).map_err(|e| CliError::Usage(format!("bad formula `{s}`: {e}")))
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Decide { sequent } => decide(&parse_sequent(sequent)?, cli.seed),
        Command::Validate {
            sequent,
            bounds,
            mode,
            engine,
            base,
        } => validate(&parse_sequent(sequent)?, bounds, *mode, *engine, base.as_ref()),
        Command::Complete { sequent } => complete(&parse_sequent(sequent)?),
        Command::Compare { sequent, bounds } => compare(&parse_sequent(sequent)?, bounds),
        Command::Locale { poset, bounds, formulas } => locale_cmd(poset.as_ref(), bounds, formulas),
        Command::Fragment {
            base,
            bounds,
            depth,
            max_ctx,
            formulas,
        } => fragment(base, bounds, *depth, *max_ctx, formulas),
        Command::CheckProof { file } => check_proof(&read(file)?),
    }
}

/// Random models on which a derivable sequent is checked to hold.
const SOUNDNESS_SAMPLES: usize = 200;

fn decide(s: &Sequent, seed: u64) -> Result<Report, CliError> {
    let d = nj::decide(&s.hyps, &s.goal)?;
    let certified = d.verify(&s.hyps, &s.goal);
    let atoms = s.atoms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sound = true;
    if d.is_derivable() && !atoms.is_empty() {
        for _ in 0..SOUNDNESS_SAMPLES {
            let m = nj::random_model(&atoms, 4, &mut rng);
            sound &= (0..m.len()).all(|w| satisfies_sequent(&m, w, &s.hyps, &s.goal));
        }
    }
    let (json, text) = match &d {
        Decision::Derivable(t) => (
            json!({
                "sequent": s.to_string(),
                "verdict": "derivable",
                "term": t.to_string(),
                "term_json": serde_json::to_value(t).expect("terms serialize"),
                "certified": certified,
                "soundness_check": {"seed": seed, "models": SOUNDNESS_SAMPLES, "passed": sound},
            }),
            format!("{s}\nverdict: derivable\nterm: {t}\ncertified: {certified}\n"),
        ),
        Decision::Underivable { model, world } => (
            json!({
                "sequent": s.to_string(),
                "verdict": "underivable",
                "countermodel": model.to_json(),
                "world": format!("w{world}"),
                "certified": certified,
                "soundness_check": {"seed": seed, "models": 0, "passed": true},
            }),
            format!(
                "{s}\nverdict: underivable\ncountermodel: {}\nrefuted at: w{world}\ncertified: {certified}\n",
                model.to_json()
            ),
        ),
    };
    Ok(Report { json, text })
}

fn mode_of(m: ModeArg) -> SemanticsMode {
    match m {
        ModeArg::Sandqvist => SemanticsMode::Sandqvist,
        ModeArg::Kripke => SemanticsMode::KripkeDisjunction,
    }
}

fn validity_text(title: &str, r: &ValidityReport) -> String {
    let mut t = format!(
        "{title}\nverdict: {}\nmode: {}, engine: {}\n",
        if r.verdict { "valid" } else { "invalid" },
        r.mode.label(),
        r.engine.label()
    );
    if r.engine == Engine::BruteForce {
        let u: Vec<&str> = r.universe.iter().map(Atom::name).collect();
        let _ = writeln!(t, "universe: {{{}}}, bounds: {}", u.join(", "), r.bounds);
        let _ = writeln!(t, "extensions examined: {}", r.extensions_examined);
    }
    if let Some(w) = &r.witness {
        let _ = writeln!(t, "witness: {}", w.to_json());
    }
    for n in &r.notes {
        let _ = writeln!(t, "note: {n}");
    }
    t
}

fn validate(
    s: &Sequent,
    b: &BoundsArgs,
    mode: ModeArg,
    engine: EngineArg,
    base: Option<&PathBuf>,
) -> Result<Report, CliError> {
    let mode = mode_of(mode);
    if let Some(path) = base {
        let file = BaseFile::parse(&read(path)?)?;
        let universe = b.universe_or(file.universe.union(&s.atoms()).cloned().collect())?;
        let cfg = ValidityConfig::brute(universe, b.bounds(), mode);
        if engine == EngineArg::Prover {
            return Err(CliError::Usage("validity in a given base needs the brute-force engine".into()));
        }
        let r = bes::entails_in_base(&file.base, &s.hyps, &s.goal, &cfg)?;
        let mut json = r.to_json();
        json["sequent"] = json!(s.to_string());
        json["base"] = json!(file.base.to_string());
        return Ok(Report {
            text: validity_text(&format!("{s} in {}", file.base), &r),
            json,
        });
    }
    let cfg = match engine {
        EngineArg::Brute => ValidityConfig::brute(b.universe_or(s.atoms())?, b.bounds(), mode),
        EngineArg::Prover => ValidityConfig {
            mode,
            ..ValidityConfig::prover()
        },
    };
    let r = bes::valid(&s.hyps, &s.goal, &cfg)?;
    let mut json = r.to_json();
    json["sequent"] = json!(s.to_string());
    Ok(Report {
        text: validity_text(&s.to_string(), &r),
        json,
    })
}

fn complete(s: &Sequent) -> Result<Report, CliError> {
    let r = bes::completeness_check(&s.hyps, &s.goal)?;
    let text = format!(
        "{s}\nN: {} rules over {} atoms\nflattened: {} |- {}\nbase N: {}\nNJ: {}\nagreement: {}\n",
        r.n.len(),
        r.flat.atoms().len(),
        r.flat_hyps.iter().map(Atom::name).collect::<Vec<_>>().join(", "),
        r.flat_goal,
        if r.base_side() { "derivable" } else { "underivable" },
        if r.prover_side() { "derivable" } else { "underivable" },
        r.agree()
    );
    Ok(Report { json: r.to_json(), text })
}

fn compare(s: &Sequent, b: &BoundsArgs) -> Result<Report, CliError> {
    let universe = b.universe_or(s.atoms())?;
    let kripke = bes::valid(
        &s.hyps,
        &s.goal,
        &ValidityConfig::brute(universe.clone(), b.bounds(), SemanticsMode::KripkeDisjunction),
    )?;
    let sandqvist = bes::valid(&s.hyps, &s.goal, &ValidityConfig::prover())?;
    let sandqvist_brute = bes::valid(
        &s.hyps,
        &s.goal,
        &ValidityConfig::brute(universe, b.bounds(), SemanticsMode::Sandqvist),
    )?;
    let word = |v: bool| if v { "valid" } else { "invalid" };
    let text = format!(
        "{s}\nkripke: {}\nsandqvist: {}\nsandqvist (bounded brute force): {}\n",
        word(kripke.verdict),
        word(sandqvist.verdict),
        word(sandqvist_brute.verdict)
    );
    Ok(Report {
        json: json!({
            "sequent": s.to_string(),
            "kripke": kripke.to_json(),
            "sandqvist": sandqvist.to_json(),
            "sandqvist_bounded": sandqvist_brute.to_json(),
        }),
        text,
    })
}

fn locale_cmd(poset: Option<&PathBuf>, b: &BoundsArgs, formulas: &[String]) -> Result<Report, CliError> {
    let (ps, interp) = match poset {
        Some(path) => Poset::parse_file(&read(path)?)?,
        None => {
            let universe = b.universe_or(["p", "q"].iter().map(|s| Atom::new(s).unwrap()).collect())?;
            let bp = locale::bes_poset(&universe, &b.bounds())?;
            (bp.poset, bp.interp)
        }
    };
    let k = NucleusOp::new(&ps, &interp)?;
    let mut formulas: Vec<Formula> = formulas.iter().map(|f| parse_formula(f)).collect::<Result<_, _>>()?;
    if formulas.is_empty() {
        let atoms: Vec<Atom> = interp.atoms().into_iter().collect();
        formulas.extend(atoms.iter().map(|a| Formula::Atom(a.clone())));
        if atoms.len() >= 2 {
            formulas.push(Formula::disj(Formula::Atom(atoms[0].clone()), Formula::Atom(atoms[1].clone())));
        }
        formulas.push(Formula::Bot);
    }
    let mut values = serde_json::Map::new();
    let mut text = format!("poset: {} elements\n", ps.len());
    for f in &formulas {
        let u = k.vsem(f)?;
        let names = ps.render(&u);
        let _ = writeln!(text, "vsem({}) = {{{}}}", render_formula(f), names.join(", "));
        values.insert(render_formula(f), json!(names));
    }
    let closed = if ps.len() <= locale::MAX_ENUMERATED_ELEMENTS {
        let c = k.omega_k()?;
        let _ = writeln!(text, "closed upsets: {}", c.len());
        json!(c.len())
    } else {
        Value::Null
    };
    Ok(Report {
        json: json!({
            "elements": ps.len(),
            "atoms": interp.atoms().iter().map(Atom::name).collect::<Vec<_>>(),
            "vsem": values,
            "closed_upsets": closed,
        }),
        text,
    })
}

fn fragment(base: &PathBuf, b: &BoundsArgs, depth: usize, max_ctx: usize, formulas: &[String]) -> Result<Report, CliError> {
    let file = BaseFile::parse(&read(base)?)?;
    let universe = b.universe_or(file.universe.clone())?;
    let frag = category::build_fragment(&file.base, &universe, &b.bounds(), depth, max_ctx)?;
    let laws = frag.check_category_laws();
    let mut interp = category::Interpreter::new(&frag, category::DisjunctionStyle::SecondOrder);
    let mut dens = Vec::new();
    let mut text = format!(
        "fragment: {} worlds, {} morphisms, {} excluded\ncategory laws: {}\n",
        frag.worlds().len(),
        frag.morphisms().len(),
        frag.excluded(),
        laws
    );
    for f in formulas {
        let phi = parse_formula(f)?;
        let d = interp.denote(&phi)?;
        let functorial = d.check_functoriality(&frag);
        let _ = writeln!(text, "[[{}]]: {:?} functorial: {functorial}", render_formula(&phi), d.cardinalities());
        let mut j = d.to_json();
        j["functorial"] = json!(functorial);
        dens.push(j);
    }
    let mut json = frag.to_json();
    json["category_laws"] = json!(laws);
    json["denotations"] = json!(dens);
    Ok(Report { json, text })
}

/// Checks a proof file. Three kinds are accepted:
/// `{"kind": "nj", "hyps": [...], "goal": "...", "term": ...}`,
/// `{"kind": "base", "universe": [...], "rules": [...], "context": [...], "goal": "p", "term": ...}` and
/// `{"kind": "countermodel", "sequent": "...", "model": {poset file}, "world": "w0"}`.
pub fn check_proof(text: &str) -> Result<Report, CliError> {
    let v = schema::parse_json(text)?;
    let obj = schema::object(&v, "")?;
    let kind = schema::string(schema::field(obj, "kind", "")?, "/kind")?;
    let formula_at = |x: &Value, at: &str| -> Result<Formula, SchemaError> {
        let s = schema::string(x, at)?;
        parse_formula_with_negation(s).map_err(|e| SchemaError::new(at, e.to_string()))
    };
    let (valid, what) = match kind {
        "nj" => {
            let mut hyps = FormulaSet::new();
            for (i, h) in schema::array(schema::field(obj, "hyps", "")?, "/hyps")?.iter().enumerate() {
                hyps.insert(formula_at(h, &schema::child("/hyps", i))?);
            }
            let goal = formula_at(schema::field(obj, "goal", "")?, "/goal")?;
            let term: NJTerm = serde_json::from_value(schema::field(obj, "term", "")?.clone())
                .map_err(|e| SchemaError::new("/term", e.to_string()))?;
            let ctx = hyp_context(&hyps);
            let seq = Sequent { hyps, goal };
            (check_nj(&ctx, &term, &seq.goal), seq.to_string())
        }
        "base" => {
            let file = BaseFile::from_value(&v, "")?;
            let mut ctx = Vec::new();
            for (i, a) in schema::array(schema::field(obj, "context", "")?, "/context")?.iter().enumerate() {
                let at = schema::child("/context", i);
                let atom = Atom::new(schema::string(a, &at)?).map_err(|e| SchemaError::new(&at, e.to_string()))?;
                if !file.universe.contains(&atom) {
                    return Err(SchemaError::new(&at, format!("atom `{atom}` is outside the declared universe")).into());
                }
                ctx.push(atom);
            }
            let goal_s = schema::string(schema::field(obj, "goal", "")?, "/goal")?;
            let goal = Atom::new(goal_s).map_err(|e| SchemaError::new("/goal", e.to_string()))?;
            if !file.universe.contains(&goal) {
                return Err(SchemaError::new("/goal", format!("atom `{goal}` is outside the declared universe")).into());
            }
            let term: DerivTerm = serde_json::from_value(schema::field(obj, "term", "")?.clone())
                .map_err(|e| SchemaError::new("/term", e.to_string()))?;
            let names: Vec<&str> = ctx.iter().map(Atom::name).collect();
            (
                check_derivation_atoms(&file.base, &ctx, &term, &goal),
                format!("{} |- {goal} in {}", names.join(", "), file.base),
            )
        }
        "countermodel" => {
            let seq_s = schema::string(schema::field(obj, "sequent", "")?, "/sequent")?;
            let seq = Sequent::parse_with_negation(seq_s).map_err(|e| SchemaError::new("/sequent", e.to_string()))?;
            let model_v = schema::field(obj, "model", "")?;
            let (ps, interp) = Poset::from_value(model_v).map_err(|e| match e {
                LocaleError::Schema(s) => SchemaError::new(format!("/model{}", s.pointer.trim_end_matches('/')), s.message),
                e => SchemaError::new("/model", e.to_string()),
            })?;
            let world_s = schema::string(schema::field(obj, "world", "")?, "/world")?;
            let world = ps
                .names()
                .iter()
                .position(|n| n == world_s)
                .ok_or_else(|| SchemaError::new("/world", format!("unknown element `{world_s}`")))?;
            let model = kripke_model(&ps, &interp)?;
            let refutes = seq.hyps.iter().all(|h| kripke_eval(&model, world, h)) && !kripke_eval(&model, world, &seq.goal);
            (refutes, format!("countermodel for {seq} at {world_s}"))
        }
        other => return Err(SchemaError::new("/kind", format!("unknown kind `{other}`")).into()),
    };
    Ok(Report {
        json: json!({"kind": kind, "claim": what, "valid": valid}),
        text: format!("{kind}: {what}\nvalid: {valid}\n"),
    })
}

fn kripke_model(ps: &Poset, interp: &locale::AtomInterp) -> Result<KripkeModel, CliError> {
    let n = ps.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b && ps.leq(a, b))
        .collect();
    let val: BTreeMap<_, _> = interp
        .iter()
        .map(|(a, u)| (a.clone(), u.members().into_iter().collect()))
        .collect();
    KripkeModel::new(n, &pairs, val).map_err(|e| CliError::Usage(e.to_string()))
}

/// A countermodel witness in the proof-file format accepted by `check-proof`.
pub fn countermodel_proof_file(s: &Sequent, model: &KripkeModel, world: usize) -> Value {
    json!({"kind": "countermodel", "sequent": s.to_string(), "model": model.to_json(), "world": format!("w{world}")})
}

/// Re-evaluates a brute-force witness against a fresh world set.
pub fn recheck_witness(w: &Witness, cfg: &ValidityConfig) -> Result<bool, CliError> {
    let ws = bes::WorldSet::new(&Base::empty(), &cfg.universe, &cfg.bounds)?;
    let mut ev = bes::Evaluator::new(&ws, cfg.mode);
    Ok(ev.recheck(w)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Outcome {
        run(std::iter::once("catbes").chain(args.iter().copied()))
    }

    #[test]
    fn decide_and_exit_codes() {
        let o = run_args(&["decide", "p -> p"]);
        assert_eq!(o.code, 0);
        assert!(o.stdout.contains("derivable"));
        let o = run_args(&["decide", "p ->"]);
        assert_eq!(o.code, 1);
        let o = run_args(&["frobnicate"]);
        assert_eq!(o.code, 1);
    }

    #[test]
    fn complete_reports_agreement() {
        let o = run_args(&["--json", "complete", "p & q |- q"]);
        assert_eq!(o.code, 0);
        let v: Value = serde_json::from_str(&o.stdout).unwrap();
        assert_eq!(v["base_derivable"], json!(true));
        assert_eq!(v["nj_derivable"], json!(true));
        assert_eq!(v["agreement"], json!(true));
    }

    #[test]
    fn cap_refusal_exits_two() {
        let o = run_args(&["validate", "p |- q", "--universe", "p,q,r,s", "--max-premises", "3", "--max-hyps", "3", "--max-extra-rules", "6"]);
        assert_eq!(o.code, 2, "{}", o.stderr);
    }

    #[test]
    fn json_is_deterministic() {
        let a = run_args(&["--json", "decide", "(p -> q) -> q |- p | q"]);
        let b = run_args(&["--json", "decide", "(p -> q) -> q |- p | q"]);
        assert_eq!(a, b);
    }
}
