//! Argument handling for the `spvkit` binary. Every action is a call into
//! the `spvkit` library.
//!
//! Exit codes: 0 success, 1 diagnostics (decode, assembly or validation
//! errors), 2 usage or I/O problems.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use spvkit::asm::{assemble, AssembleOptions};
use spvkit::dis::{disassemble, DisassemblerOptions};
use spvkit::validate::{has_errors, validate_bytes};
use spvkit::Grammar;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTICS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tool {
    Dis,
    Asm,
    Val,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Color {
    Auto,
    Always,
    Never,
}

#[derive(Debug, Parser)]
#[command(
    name = "spvkit",
    version,
    about = "Disassemble, assemble and validate SPIR-V modules",
    after_help = "Exit status: 0 on success, 1 when the input has errors, 2 on usage or I/O errors.\n\
                  SPIRV_GRAMMAR_DIR overrides the built-in grammar with a directory holding\n\
                  spirv.core.grammar.json and extinst.opencl.std.100.grammar.json."
)]
pub struct Cli {
    /// What to do with the input.
    #[arg(long, value_enum, default_value_t = Tool::Dis)]
    pub tool: Tool,

    /// Input file (legacy spelling). Without a value it is ignored, so
    /// `-d --tool asm in.txt` still works.
    #[arg(short = 'd', value_name = "FILE", num_args = 0..=1)]
    pub legacy_input: Option<Option<PathBuf>>,

    /// Input file, or `-` for standard input.
    #[arg(value_name = "INPUT")]
    pub input: Option<PathBuf>,

    /// Output file. Defaults to standard output.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,

    /// Omit the `; SPIR-V` header comments.
    #[arg(long)]
    pub no_header: bool,

    /// Do not align result ids.
    #[arg(long)]
    pub no_indent: bool,

    /// Separate module sections with blank lines.
    #[arg(long)]
    pub group: bool,

    /// Print numeric ids even where OpName gives a name.
    #[arg(long)]
    pub no_inline_names: bool,

    #[arg(long, value_enum, default_value_t = Color::Auto)]
    pub color: Color,

    /// Reject unknown opcodes instead of printing them raw.
    #[arg(long)]
    pub strict: bool,

    /// Write binary output even to a terminal.
    #[arg(long)]
    pub force: bool,
}

impl Cli {
    pub fn input_path(&self) -> Result<&Path, String> {
        let legacy = self.legacy_input.as_ref().and_then(|d| d.as_deref());
        match (legacy, self.input.as_deref()) {
            (Some(_), Some(_)) => {
                Err("give the input either with -d or as a positional argument, not both".into())
            }
            (Some(p), None) | (None, Some(p)) => Ok(p),
            (None, None) => Err("no input file given".into()),
        }
    }

    pub fn disassembler_options(&self, terminal: bool) -> DisassemblerOptions {
        DisassemblerOptions {
            highlight: match self.color {
                Color::Always => true,
                Color::Never => false,
                Color::Auto => terminal && self.output.is_none(),
            },
            inline_names: !self.no_inline_names,
            no_indent: self.no_indent,
            group: self.group,
            no_header: self.no_header,
            strict: self.strict,
        }
    }
}

/// Process-level context, passed in so tests can substitute it.
pub struct Env<'a> {
    pub stdin: &'a mut dyn Read,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
    pub stdout_is_terminal: bool,
    pub grammar_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Diagnostics(String),
}

pub fn run<I, T>(args: I, env: &mut Env<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let out: &mut dyn Write = if e.use_stderr() {
                env.stderr
            } else {
                env.stdout
            };
            let _ = write!(out, "{}", e.render());
            return code;
        }
    };
    match execute(&cli, env) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(
                env.stderr,
                "spvkit: {msg}\n\nUsage: spvkit [--tool dis|asm|val] [-o FILE] INPUT"
            );
            EXIT_USAGE
        }
        Err(Failure::Diagnostics(msg)) => {
            let _ = writeln!(env.stderr, "{msg}");
            EXIT_DIAGNOSTICS
        }
    }
}

fn execute(cli: &Cli, env: &mut Env<'_>) -> Result<i32, Failure> {
    let path = cli.input_path().map_err(Failure::Usage)?;
    let input = read_input(path, env.stdin).map_err(Failure::Usage)?;

    let owned;
    let g = match &env.grammar_dir {
        Some(dir) => {
            owned = Grammar::from_dir(dir).map_err(|e| {
                Failure::Usage(format!("cannot load grammar from {}: {e}", dir.display()))
            })?;
            &owned
        }
        None => Grammar::unified(),
    };

    match cli.tool {
        Tool::Dis => {
            let opts = cli.disassembler_options(env.stdout_is_terminal);
            let text = disassemble(g, &input, &opts)
                .map_err(|e| Failure::Diagnostics(format!("{}: {e}", path.display())))?;
            write_output(cli.output.as_deref(), text.as_bytes(), env.stdout)?;
        }
        Tool::Asm => {
            let text = String::from_utf8(input).map_err(|_| {
                Failure::Diagnostics(format!("{}: input is not UTF-8 text", path.display()))
            })?;
            if cli.output.is_none() && env.stdout_is_terminal && !cli.force {
                return Err(Failure::Usage(
                    "refusing to write binary to a terminal; use -o FILE or --force".into(),
                ));
            }
            let bytes = assemble(g, &text, &AssembleOptions::default()).map_err(|e| {
                let lines: Vec<String> = e
                    .diagnostics
                    .iter()
                    .map(|d| format!("{}:{d}", path.display()))
                    .collect();
                Failure::Diagnostics(lines.join("\n"))
            })?;
            write_output(cli.output.as_deref(), &bytes, env.stdout)?;
        }
        Tool::Val => {
            let diags = validate_bytes(g, &input);
            let mut report = String::new();
            for d in &diags {
                report.push_str(&d.to_string());
                report.push('\n');
            }
            write_output(cli.output.as_deref(), report.as_bytes(), env.stdout)?;
            if has_errors(&diags) {
                return Ok(EXIT_DIAGNOSTICS);
            }
        }
    }
    Ok(EXIT_OK)
}

fn read_input(path: &Path, stdin: &mut dyn Read) -> Result<Vec<u8>, String> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        stdin
            .read_to_end(&mut buf)
            .map_err(|e| format!("reading standard input: {e}"))?;
        return Ok(buf);
    }
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_output(path: Option<&Path>, data: &[u8], stdout: &mut dyn Write) -> Result<(), Failure> {
    let r = match path {
        Some(p) if p != Path::new("-") => {
            fs::write(p, data).map_err(|e| format!("{}: {e}", p.display()))
        }
        _ => stdout
            .write_all(data)
            .and_then(|_| stdout.flush())
            .map_err(|e| format!("writing standard output: {e}")),
    };
    r.map_err(Failure::Usage)
}

/// Runs against the real process streams.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use std::io::IsTerminal;
    let stdout = io::stdout();
    let terminal = stdout.is_terminal();
    let mut env = Env {
        stdin: &mut io::stdin().lock(),
        stdout: &mut stdout.lock(),
        stderr: &mut io::stderr().lock(),
        stdout_is_terminal: terminal,
        grammar_dir: std::env::var_os("SPIRV_GRAMMAR_DIR").map(PathBuf::from),
    };
    run(args, &mut env)
}
