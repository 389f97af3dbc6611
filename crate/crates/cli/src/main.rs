//! `nomata` — command-line workbench for register automata over infinite
//! alphabets and the orbit-finite sets behind them.
//!
//! The tool reads the same three text formats the library parses — files
//! whose header names `dfa`, `nfa` or `fma` — and can run words, minimize,
//! compare, combine and translate machines, count orbits of set
//! expressions, and cross-check every symbolic answer against a brute-force
//! restriction to a finite domain.
//!
//! Exit codes: `0` for success or a positive verdict, `1` for a semantic
//! negative (word rejected, automata inequivalent, language non-empty,
//! oracle divergence), `2` for usage, parse or validation errors.
//!
//! Reports go to standard output; `--format json` switches them to a
//! single JSON object with stable (alphabetically ordered) keys.  Errors
//! are reported on standard error in human mode and as `{"error": …}` on
//! standard output in JSON mode.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nomata::automata::{
    emptiness, equivalence_counterexample, membership_pool, minimize, nfa_member, parse_dfa,
    parse_nfa, product_dfa, write_dfa, write_nfa, BoolOp, FraisseDfa, Letter, Membership,
    NominalNfa,
};
use nomata::fma::{dfa_to_det_fma, fma_accepts, fma_to_nfa, nfa_to_fma, parse_fma, write_fma, Fma};
use nomata::nomset::parse_expr;
use nomata::oracle::{restrict_dfa, restrict_fma, restrict_nfa, ClassicalAutomaton, FiniteDomain};
use nomata::symmetry::{Backend, DataValue};
use nomata::{Error, Result};

/// Environment variable capping the membership simulation pool; the
/// `--pool-cap` flag takes precedence.
const POOL_CAP_VAR: &str = "NOMATA_POOL_CAP";

#[derive(Parser)]
#[command(
    name = "nomata",
    version,
    about = "Workbench for register automata over infinite alphabets"
)]
struct Cli {
    /// Report format on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a word through an automaton and print `accept` or `reject`.
    Run {
        /// Automaton file (deterministic, nondeterministic or memory
        /// machine — told apart by the file header).
        file: PathBuf,
        /// Space-separated value literals; `""` is the empty word.  Letters
        /// of machines with several labels are written `label:value`.
        #[arg(long)]
        word: String,
        /// Also print every configuration the run visits (deterministic
        /// automata only).
        #[arg(long)]
        trace: bool,
        /// Cap on the membership simulation pool of nondeterministic
        /// automata; overrides the NOMATA_POOL_CAP environment variable.
        #[arg(long)]
        pool_cap: Option<usize>,
    },
    /// Minimize a deterministic automaton.
    Minimize {
        file: PathBuf,
        /// Write the minimized automaton here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decide whether two deterministic automata accept the same language.
    Equiv { a: PathBuf, b: PathBuf },
    /// Decide whether a deterministic automaton accepts no word at all.
    Empty { file: PathBuf },
    /// Combine two deterministic automata state-by-state.
    Product {
        a: PathBuf,
        b: PathBuf,
        /// How to combine the two acceptance verdicts.
        #[arg(long)]
        op: String,
        /// Write the product automaton here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Count the orbits of a set expression such as `prod(dtuple(2),atom)`.
    Orbits {
        /// Expression: `atom`, `tuple(k)`, `dtuple(k)`, `set2`, `otuple(k)`,
        /// `prod(e1,e2)`, `sum(e1,e2)`, or an `orbit(struct{...})` literal.
        #[arg(long)]
        expr: String,
        /// Data symmetry: `equality`, `order` or `graph`.
        #[arg(long)]
        symmetry: String,
    },
    /// List the letter-classes a state of a deterministic automaton
    /// distinguishes.
    Annotations {
        file: PathBuf,
        /// State name as written in the file.
        #[arg(long)]
        state: String,
    },
    /// Translate a memory machine into a nondeterministic automaton.
    #[command(name = "fma2nfa")]
    Fma2Nfa {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Translate a nondeterministic automaton into a memory machine.
    #[command(name = "nfa2fma")]
    Nfa2Fma {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Translate a deterministic automaton into a deterministic memory
    /// machine.
    #[command(name = "dfa2fma")]
    Dfa2Fma {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Cross-check a machine against its brute-force restriction to a
    /// finite domain, or compare two machines over that domain.
    Oracle {
        file: PathBuf,
        /// Comma-separated domain values in the machine's symmetry, e.g.
        /// `0,1,2` or `0,1/2,1` or `g0,g1,g2`.
        #[arg(long)]
        domain: String,
        /// Check every word up to this length.
        #[arg(long)]
        maxlen: usize,
        /// Compare the restricted languages of FILE and this machine
        /// instead of checking FILE against itself.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Cap on the membership simulation pool of nondeterministic
        /// automata; overrides the NOMATA_POOL_CAP environment variable.
        #[arg(long)]
        pool_cap: Option<usize>,
    },
    /// Parse and validate a file, reporting its kind and size.
    Validate { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(&cli.command) {
        Ok(report) => {
            match cli.format {
                Format::Human => println!("{}", report.human),
                Format::Json => println!("{}", report.json),
            }
            if report.positive {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            match cli.format {
                Format::Human => eprintln!("error: {e}"),
                Format::Json => println!("{}", json!({ "error": e.to_string() })),
            }
            ExitCode::from(2)
        }
    }
}

/// What a subcommand reports: text for humans, a JSON object with stable
/// keys, and whether the outcome counts as semantically positive (exit 0).
struct Report {
    human: String,
    json: Value,
    positive: bool,
}

fn run_command(cmd: &Cmd) -> Result<Report> {
    match cmd {
        Cmd::Run { file, word, trace, pool_cap } => cmd_run(file, word, *trace, *pool_cap),
        Cmd::Minimize { file, output } => cmd_minimize(file, output.as_deref()),
        Cmd::Equiv { a, b } => cmd_equiv(a, b),
        Cmd::Empty { file } => cmd_empty(file),
        Cmd::Product { a, b, op, output } => cmd_product(a, b, op, output.as_deref()),
        Cmd::Orbits { expr, symmetry } => cmd_orbits(expr, symmetry),
        Cmd::Annotations { file, state } => cmd_annotations(file, state),
        Cmd::Fma2Nfa { file, output } => cmd_fma2nfa(file, output.as_deref()),
        Cmd::Nfa2Fma { file, output } => cmd_nfa2fma(file, output.as_deref()),
        Cmd::Dfa2Fma { file, output } => cmd_dfa2fma(file, output.as_deref()),
        Cmd::Oracle { file, domain, maxlen, against, pool_cap } => {
            cmd_oracle(file, domain, *maxlen, against.as_deref(), *pool_cap)
        }
        Cmd::Validate { file } => cmd_validate(file),
    }
}

// ---------------------------------------------------------------------------
// Loading and shared plumbing

/// Any of the three machine kinds a file can hold.
enum Machine {
    Dfa(FraisseDfa),
    Nfa(NominalNfa),
    Fma(Fma),
}

impl Machine {
    fn kind(&self) -> &'static str {
        match self {
            Machine::Dfa(_) => "dfa",
            Machine::Nfa(_) => "nfa",
            Machine::Fma(_) => "fma",
        }
    }

    fn backend(&self) -> Backend {
        match self {
            Machine::Dfa(d) => d.backend(),
            Machine::Nfa(a) => a.backend(),
            Machine::Fma(_) => Backend::Equality,
        }
    }

    /// Finite label alphabet; single-label machines use the placeholder
    /// label `.`.
    fn labels(&self) -> Vec<String> {
        match self {
            Machine::Dfa(_) => vec![".".to_string()],
            Machine::Nfa(a) => a.labels().to_vec(),
            Machine::Fma(m) => m.labels().to_vec(),
        }
    }

    fn state_count(&self) -> usize {
        match self {
            Machine::Dfa(d) => d.states().len(),
            Machine::Nfa(a) => a.state_names().len(),
            Machine::Fma(m) => m.controls().len(),
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// The kind keyword of a machine file: the first non-comment directive
/// after the optional `symmetry` header.
fn detect_kind(text: &str) -> Option<&'static str> {
    for line in text.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        match t.split_whitespace().next()? {
            "dfa" => return Some("dfa"),
            "nfa" => return Some("nfa"),
            "fma" => return Some("fma"),
            "symmetry" => continue,
            _ => return None,
        }
    }
    None
}

fn load_machine(path: &Path) -> Result<Machine> {
    let text = read_file(path)?;
    match detect_kind(&text) {
        Some("dfa") => parse_dfa(&text).map(Machine::Dfa),
        Some("nfa") => parse_nfa(&text).map(Machine::Nfa),
        Some("fma") => parse_fma(&text).map(Machine::Fma),
        _ => Err(Error::Validation(format!(
            "{}: no `dfa`, `nfa` or `fma` directive found in the header",
            path.display()
        ))),
    }
}

fn load_dfa(path: &Path, needed_for: &str) -> Result<FraisseDfa> {
    match load_machine(path)? {
        Machine::Dfa(d) => Ok(d),
        other => Err(Error::Validation(format!(
            "{}: `{needed_for}` needs a deterministic automaton, found `{}`",
            path.display(),
            other.kind()
        ))),
    }
}

fn load_nfa(path: &Path, needed_for: &str) -> Result<NominalNfa> {
    match load_machine(path)? {
        Machine::Nfa(a) => Ok(a),
        other => Err(Error::Validation(format!(
            "{}: `{needed_for}` needs a nondeterministic automaton, found `{}`",
            path.display(),
            other.kind()
        ))),
    }
}

fn load_fma(path: &Path, needed_for: &str) -> Result<Fma> {
    match load_machine(path)? {
        Machine::Fma(m) => Ok(m),
        other => Err(Error::Validation(format!(
            "{}: `{needed_for}` needs a memory machine, found `{}`",
            path.display(),
            other.kind()
        ))),
    }
}

/// Parses a space-separated word of plain data values.
fn parse_values(backend: Backend, text: &str) -> Result<Vec<DataValue>> {
    text.split_whitespace().map(|t| DataValue::parse(backend, t)).collect()
}

/// Parses a space-separated word of letters; a token `label:value` names
/// one of `labels`, a bare token takes the first label.
fn parse_letters(backend: Backend, labels: &[String], text: &str) -> Result<Vec<Letter>> {
    text.split_whitespace()
        .map(|tok| {
            let (label, value_text) = match tok.split_once(':') {
                Some((name, rest)) => {
                    let idx = labels.iter().position(|l| l == name).ok_or_else(|| {
                        Error::Validation(format!(
                            "unknown label `{name}` in `{tok}` (labels: {})",
                            labels.join(" ")
                        ))
                    })?;
                    (idx, rest)
                }
                None => (0, tok),
            };
            Ok(Letter { label, value: DataValue::parse(backend, value_text)? })
        })
        .collect()
}

fn format_letter(labels: &[String], letter: &Letter) -> String {
    if labels.len() > 1 {
        format!("{}:{}", labels[letter.label], letter.value)
    } else {
        letter.value.to_string()
    }
}

fn format_word(labels: &[String], word: &[Letter]) -> String {
    if word.is_empty() {
        "\"\"".to_string()
    } else {
        word.iter().map(|l| format_letter(labels, l)).collect::<Vec<_>>().join(" ")
    }
}

fn format_values(values: &[DataValue]) -> String {
    if values.is_empty() {
        "\"\"".to_string()
    } else {
        values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
    }
}

fn json_word(labels: &[String], word: &[Letter]) -> Value {
    Value::Array(word.iter().map(|l| Value::String(format_letter(labels, l))).collect())
}

fn json_values(values: &[DataValue]) -> Value {
    Value::Array(values.iter().map(|v| Value::String(v.to_string())).collect())
}

/// The pool cap in effect: the flag, else the NOMATA_POOL_CAP environment
/// variable, else the library default.
fn effective_pool_cap(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(POOL_CAP_VAR) {
        Ok(text) => text.trim().parse::<usize>().map(Some).map_err(|_| {
            Error::Validation(format!("{POOL_CAP_VAR} must be a number, got `{text}`"))
        }),
        Err(_) => Ok(None),
    }
}

/// Builds the output-handling parts shared by `minimize`, `product` and the
/// translation commands: with `-o` the text goes to the file and the report
/// is a summary; without it the text itself is the report.
fn emit_machine(
    command: &str,
    states: usize,
    text: String,
    output: Option<&Path>,
    extra: &[(&str, Value)],
) -> Result<Report> {
    let mut obj = json!({
        "command": command,
        "states": states,
        "output": output.map(|p| p.display().to_string()),
        "text": text,
    });
    for (key, value) in extra {
        obj[*key] = value.clone();
    }
    let human = match output {
        Some(path) => {
            write_file(path, &text)?;
            format!("states: {states}\nwrote {}", path.display())
        }
        None => text.trim_end().to_string(),
    };
    Ok(Report { human, json: obj, positive: true })
}

// ---------------------------------------------------------------------------
// Subcommands

fn cmd_run(file: &Path, word_text: &str, trace: bool, pool_cap: Option<usize>) -> Result<Report> {
    let machine = load_machine(file)?;
    let labels = machine.labels();
    match machine {
        Machine::Dfa(d) => {
            let word = parse_values(d.backend(), word_text)?;
            let run = d.run_trace(&word)?;
            let mut lines = Vec::new();
            let mut trace_json = Vec::new();
            if trace {
                for config in &run.configs {
                    let vals: Vec<String> =
                        config.valuation.iter().map(|v| v.to_string()).collect();
                    let entry =
                        format!("{} [{}]", d.states()[config.state].name, vals.join(", "));
                    lines.push(entry.clone());
                    trace_json.push(Value::String(entry));
                }
            }
            lines.push(verdict_word(run.accepted).to_string());
            let mut obj = json!({
                "command": "run",
                "kind": "dfa",
                "word": json_values(&word),
                "verdict": verdict_word(run.accepted),
            });
            if trace {
                obj["trace"] = Value::Array(trace_json);
            }
            Ok(Report { human: lines.join("\n"), json: obj, positive: run.accepted })
        }
        Machine::Nfa(a) => {
            if trace {
                return Err(Error::Validation(
                    "trace output is only available for deterministic automata".into(),
                ));
            }
            let word = parse_letters(a.backend(), &labels, word_text)?;
            let cap = effective_pool_cap(pool_cap)?;
            let pool = membership_pool(&a, &word, cap)?;
            let accepted = match nfa_member(&a, &word, cap)? {
                Membership::Accepted => true,
                Membership::Rejected => false,
                Membership::Inconclusive(why) => {
                    return Err(Error::Validation(format!("membership inconclusive: {why}")))
                }
            };
            let pool_strings: Vec<String> = pool.iter().map(|v| v.to_string()).collect();
            let human = format!("pool: {}\n{}", pool_strings.join(" "), verdict_word(accepted));
            let obj = json!({
                "command": "run",
                "kind": "nfa",
                "word": json_word(&labels, &word),
                "pool": pool_strings,
                "verdict": verdict_word(accepted),
            });
            Ok(Report { human, json: obj, positive: accepted })
        }
        Machine::Fma(m) => {
            if trace {
                return Err(Error::Validation(
                    "trace output is only available for deterministic automata".into(),
                ));
            }
            let word = parse_letters(Backend::Equality, &labels, word_text)?;
            let accepted = fma_accepts(&m, &word)?;
            let obj = json!({
                "command": "run",
                "kind": "fma",
                "word": json_word(&labels, &word),
                "verdict": verdict_word(accepted),
            });
            Ok(Report {
                human: verdict_word(accepted).to_string(),
                json: obj,
                positive: accepted,
            })
        }
    }
}

fn verdict_word(accepted: bool) -> &'static str {
    if accepted {
        "accept"
    } else {
        "reject"
    }
}

fn cmd_minimize(file: &Path, output: Option<&Path>) -> Result<Report> {
    let d = load_dfa(file, "minimize")?;
    let min = minimize(&d)?;
    let states = min.states().len();
    let before = d.states().len();
    emit_machine(
        "minimize",
        states,
        write_dfa(&min),
        output,
        &[("states_before", json!(before))],
    )
}

fn cmd_equiv(a_path: &Path, b_path: &Path) -> Result<Report> {
    let a = load_dfa(a_path, "equiv")?;
    let b = load_dfa(b_path, "equiv")?;
    match equivalence_counterexample(&a, &b)? {
        None => Ok(Report {
            human: "equivalent".to_string(),
            json: json!({
                "command": "equiv",
                "equivalent": true,
                "counterexample": Value::Null,
            }),
            positive: true,
        }),
        Some(word) => Ok(Report {
            human: format!("not equivalent; counterexample: {}", format_values(&word)),
            json: json!({
                "command": "equiv",
                "equivalent": false,
                "counterexample": json_values(&word),
            }),
            positive: false,
        }),
    }
}

fn cmd_empty(file: &Path) -> Result<Report> {
    let d = load_dfa(file, "empty")?;
    match emptiness(&d)? {
        None => Ok(Report {
            human: "empty".to_string(),
            json: json!({"command": "empty", "empty": true, "witness": Value::Null}),
            positive: true,
        }),
        Some(word) => Ok(Report {
            human: format!("non-empty; witness: {}", format_values(&word)),
            json: json!({
                "command": "empty",
                "empty": false,
                "witness": json_values(&word),
            }),
            positive: false,
        }),
    }
}

fn cmd_product(a_path: &Path, b_path: &Path, op: &str, output: Option<&Path>) -> Result<Report> {
    let a = load_dfa(a_path, "product")?;
    let b = load_dfa(b_path, "product")?;
    let op = BoolOp::parse(op)?;
    let prod = product_dfa(&a, &b, op)?;
    let states = prod.states().len();
    emit_machine(
        "product",
        states,
        write_dfa(&prod),
        output,
        &[("op", json!(format!("{op:?}").to_lowercase()))],
    )
}

fn cmd_orbits(expr: &str, symmetry: &str) -> Result<Report> {
    let backend = Backend::parse(symmetry)?;
    let set = parse_expr(backend, expr)?;
    let orbits = set.orbit_count();
    Ok(Report {
        human: format!("orbits: {orbits}"),
        json: json!({
            "command": "orbits",
            "expr": expr,
            "symmetry": backend.to_string(),
            "orbits": orbits,
        }),
        positive: true,
    })
}

fn cmd_annotations(file: &Path, state: &str) -> Result<Report> {
    let d = load_dfa(file, "annotations")?;
    let idx = d
        .state_index(state)
        .ok_or_else(|| Error::Validation(format!("unknown state `{state}`")))?;
    let items: Vec<String> = d.annotations_of(idx).iter().map(|a| a.to_string()).collect();
    Ok(Report {
        human: items.join("\n"),
        json: json!({
            "command": "annotations",
            "state": state,
            "annotations": items,
        }),
        positive: true,
    })
}

fn cmd_fma2nfa(file: &Path, output: Option<&Path>) -> Result<Report> {
    let m = load_fma(file, "fma2nfa")?;
    let nfa = fma_to_nfa(&m)?;
    let states = nfa.state_names().len();
    emit_machine("fma2nfa", states, write_nfa(&nfa)?, output, &[])
}

fn cmd_nfa2fma(file: &Path, output: Option<&Path>) -> Result<Report> {
    let a = load_nfa(file, "nfa2fma")?;
    let m = nfa_to_fma(&a)?;
    let states = m.controls().len();
    emit_machine("nfa2fma", states, write_fma(&m), output, &[])
}

fn cmd_dfa2fma(file: &Path, output: Option<&Path>) -> Result<Report> {
    let d = load_dfa(file, "dfa2fma")?;
    let m = dfa_to_det_fma(&d)?;
    let states = m.controls().len();
    emit_machine("dfa2fma", states, write_fma(&m), output, &[])
}

fn cmd_validate(file: &Path) -> Result<Report> {
    let machine = load_machine(file)?;
    let kind = machine.kind();
    let backend = machine.backend();
    let states = machine.state_count();
    Ok(Report {
        human: format!("ok: {kind} over {backend}, {states} states"),
        json: json!({
            "command": "validate",
            "kind": kind,
            "symmetry": backend.to_string(),
            "states": states,
            "valid": true,
        }),
        positive: true,
    })
}

// ---------------------------------------------------------------------------
// Oracle

fn restrict_machine(machine: &Machine, dom: &FiniteDomain) -> Result<ClassicalAutomaton> {
    match machine {
        Machine::Dfa(d) => restrict_dfa(d, dom),
        Machine::Nfa(a) => restrict_nfa(a, dom),
        Machine::Fma(m) => restrict_fma(m, dom),
    }
}

/// Symbolic acceptance of one word, per machine kind.
fn symbolic_accepts(
    machine: &Machine,
    labels: &[String],
    word: &[Letter],
    cap: Option<usize>,
) -> Result<bool> {
    match machine {
        Machine::Dfa(d) => {
            let values: Vec<DataValue> = word.iter().map(|l| l.value.clone()).collect();
            d.run(&values)
        }
        Machine::Nfa(a) => match nfa_member(a, word, cap)? {
            Membership::Accepted => Ok(true),
            Membership::Rejected => Ok(false),
            Membership::Inconclusive(why) => Err(Error::Validation(format!(
                "membership inconclusive on `{}`: {why}",
                format_word(labels, word)
            ))),
        },
        Machine::Fma(m) => fma_accepts(m, word),
    }
}

/// All words over `alphabet` of length at most `maxlen`, shortest first.
fn words_over(alphabet: &[Letter], maxlen: usize) -> Result<Vec<Vec<Letter>>> {
    let mut total: usize = 1;
    let mut layer_size: usize = 1;
    for _ in 0..maxlen {
        layer_size = layer_size.saturating_mul(alphabet.len());
        total = total.saturating_add(layer_size);
    }
    if total > 1_000_000 {
        return Err(Error::Validation(format!(
            "{total} words to enumerate; shrink the domain or the maximum length"
        )));
    }
    let mut out: Vec<Vec<Letter>> = vec![Vec::new()];
    let mut layer: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..maxlen {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for word in &layer {
            for letter in alphabet {
                let mut extended = word.clone();
                extended.push(letter.clone());
                next.push(extended);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    Ok(out)
}

fn cmd_oracle(
    file: &Path,
    domain: &str,
    maxlen: usize,
    against: Option<&Path>,
    pool_cap: Option<usize>,
) -> Result<Report> {
    let machine = load_machine(file)?;
    let dom = FiniteDomain::parse(machine.backend(), domain)?;
    let restricted = restrict_machine(&machine, &dom)?;
    match against {
        None => oracle_self(&machine, &restricted, maxlen, pool_cap),
        Some(other_path) => {
            let other = load_machine(other_path)?;
            if other.backend() != machine.backend() {
                return Err(Error::BackendMismatch(format!(
                    "{} is over {}, {} over {}",
                    file.display(),
                    machine.backend(),
                    other_path.display(),
                    other.backend()
                )));
            }
            let labels = machine.labels();
            let other_labels = other.labels();
            if labels.len() != other_labels.len()
                || (labels.len() > 1 && labels != other_labels)
            {
                return Err(Error::Validation(format!(
                    "label alphabets differ: `{}` vs `{}`",
                    labels.join(" "),
                    other_labels.join(" ")
                )));
            }
            let other_restricted = restrict_machine(&other, &dom)?;
            oracle_compare(&restricted, &other_restricted, &labels, maxlen)
        }
    }
}

/// Checks the machine's symbolic verdict against its finite restriction on
/// every word up to `maxlen` over the restricted alphabet.
fn oracle_self(
    machine: &Machine,
    restricted: &ClassicalAutomaton,
    maxlen: usize,
    pool_cap: Option<usize>,
) -> Result<Report> {
    let cap = effective_pool_cap(pool_cap)?;
    let labels = machine.labels();
    let words = words_over(restricted.alphabet(), maxlen)?;
    let mut accepted = 0usize;
    let mut checked = 0usize;
    for word in &words {
        let classical = restricted.accepts(word)?;
        let symbolic = symbolic_accepts(machine, &labels, word, cap)?;
        checked += 1;
        if classical != symbolic {
            let human = format!(
                "checked {checked} words; divergence on `{}`: symbolic {}, classical {}",
                format_word(&labels, word),
                verdict_word(symbolic),
                verdict_word(classical)
            );
            let obj = json!({
                "command": "oracle",
                "mode": "self",
                "words": checked,
                "accepted": accepted,
                "divergence": {
                    "word": json_word(&labels, word),
                    "symbolic": verdict_word(symbolic),
                    "classical": verdict_word(classical),
                },
            });
            return Ok(Report { human, json: obj, positive: false });
        }
        if classical {
            accepted += 1;
        }
    }
    let human = format!(
        "checked {checked} words of length <= {maxlen}; {accepted} accepted; no divergence"
    );
    let obj = json!({
        "command": "oracle",
        "mode": "self",
        "words": checked,
        "accepted": accepted,
        "divergence": Value::Null,
    });
    Ok(Report { human, json: obj, positive: true })
}

/// Compares the restricted languages of two machines up to `maxlen`.
fn oracle_compare(
    first: &ClassicalAutomaton,
    second: &ClassicalAutomaton,
    labels: &[String],
    maxlen: usize,
) -> Result<Report> {
    let lang_first = first.language_upto(maxlen);
    let lang_second = second.language_upto(maxlen);
    let divergence = lang_first
        .symmetric_difference(&lang_second)
        .min()
        .cloned();
    match divergence {
        None => {
            let human = format!(
                "restricted languages agree up to length {maxlen}: {} accepted words",
                lang_first.len()
            );
            let obj = json!({
                "command": "oracle",
                "mode": "against",
                "accepted_first": lang_first.len(),
                "accepted_second": lang_second.len(),
                "divergence": Value::Null,
            });
            Ok(Report { human, json: obj, positive: true })
        }
        Some(word) => {
            let first_accepts = lang_first.contains(&word);
            let (yes, no) = if first_accepts { ("first", "second") } else { ("second", "first") };
            let human = format!(
                "divergence on `{}`: {yes} accepts, {no} rejects \
                 (first accepts {} words, second {})",
                format_word(labels, &word),
                lang_first.len(),
                lang_second.len()
            );
            let obj = json!({
                "command": "oracle",
                "mode": "against",
                "accepted_first": lang_first.len(),
                "accepted_second": lang_second.len(),
                "divergence": {
                    "word": json_word(labels, &word),
                    "first": verdict_word(first_accepts),
                    "second": verdict_word(!first_accepts),
                },
            });
            Ok(Report { human, json: obj, positive: false })
        }
    }
}
