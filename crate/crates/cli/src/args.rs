use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tracekit", version, about = "Flexible traceability management")]
pub struct Cli {
    /// Repository directory.
    #[arg(long, global = true, default_value = ".")]
    pub repo: PathBuf,
    /// Acting user (falls back to TRACEKIT_USER).
    #[arg(long, global = true)]
    pub user: Option<String>,
    /// Acting team (falls back to TRACEKIT_TEAM, then the user id).
    #[arg(long, global = true)]
    pub team: Option<String>,
    /// Fixed RFC 3339 time for every journal entry.
    #[arg(long, global = true)]
    pub clock: Option<String>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a repository.
    Init(InitArgs),
    /// Create an artifact.
    Add(AddArgs),
    /// Change an artifact or a link.
    Edit(EditArgs),
    /// Create a direct trace link.
    Link(LinkArgs),
    /// Relate two artifacts through a mapping object.
    Map(MapArgs),
    /// Import a ReqIF document.
    ImportReqif(ImportArgs),
    /// Export selected artifacts as ReqIF.
    ExportReqif(ExportArgs),
    /// Run the quality checks of a phase profile.
    Check(CheckArgs),
    /// Apply the gate of a profile to the last saved report.
    Assess(PhaseArgs),
    /// Freeze a baseline.
    Baseline(BaselineArgs),
    /// Compare two baselines.
    DiffBaselines(DiffArgs),
    /// List boundary-object candidates mined from the journal.
    Candidates(CandidateArgs),
    /// Promote an artifact to a boundary object.
    Promote(PromoteArgs),
    /// Migrate the schema and evolve instance data.
    Evolve(EvolveArgs),
    /// Adjust a phase profile.
    Tune(TuneArgs),
    /// Repository overview, or the saved report of a phase.
    Report(ReportArgs),
    /// Query the change journal.
    Journal(JournalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Prototype,
    Development,
    Maintenance,
}

impl From<PhaseArg> for tracekit::quality::Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Prototype => Self::Prototype,
            PhaseArg::Development => Self::Development,
            PhaseArg::Maintenance => Self::Maintenance,
        }
    }
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// TIM schema JSON; the built-in automotive schema otherwise.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Populate with the running example.
    #[arg(long)]
    pub example: bool,
}

#[derive(Debug, Args)]
pub struct AddArgs {
    pub type_name: String,
    pub title: String,
    /// Attribute as `name=value`; repeatable.
    #[arg(long = "attr", value_name = "NAME=VALUE")]
    pub attrs: Vec<String>,
    #[arg(long)]
    pub scope: Option<String>,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    /// Artifact (A…) or link (L…) id.
    pub id: String,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long = "attr", value_name = "NAME=VALUE")]
    pub attrs: Vec<String>,
    #[arg(long = "unset", value_name = "NAME")]
    pub unset: Vec<String>,
    /// `in-work` or `released`.
    #[arg(long)]
    pub status: Option<String>,
    #[arg(long)]
    pub scope: Option<String>,
    #[arg(long = "type", value_name = "TYPE")]
    pub retype: Option<String>,
    /// Request a new version regardless of policy.
    #[arg(long)]
    pub bump: bool,
    /// Mark the change set as a major change.
    #[arg(long)]
    pub major: bool,
    /// Re-pin a link to the current endpoint versions.
    #[arg(long)]
    pub refresh: bool,
    #[arg(long)]
    pub delete: bool,
    /// Record the responsible user.
    #[arg(long)]
    pub owner: Option<String>,
    /// Affected users for the ownership record, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub affected: Vec<String>,
    /// Profile whose versioning policy applies.
    #[arg(long, value_enum, default_value = "development")]
    pub phase: PhaseArg,
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    pub link_type: String,
    #[arg(long = "from", required = true, num_args = 1..)]
    pub sources: Vec<String>,
    #[arg(long = "to", required = true, num_args = 1..)]
    pub targets: Vec<String>,
    /// Profile deciding whether endpoint types are enforced.
    #[arg(long, value_enum, default_value = "development")]
    pub phase: PhaseArg,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    pub link_type: String,
    pub source: String,
    pub target: String,
    #[arg(long, value_enum, default_value = "development")]
    pub phase: PhaseArg,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub file: PathBuf,
    #[arg(long, default_value = "type=ExternalRequirement")]
    pub select: String,
    /// Document identifier.
    #[arg(long, default_value = "tracekit-export")]
    pub identifier: String,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum)]
    pub phase: PhaseArg,
    /// Audit a frozen baseline instead of the working heads.
    #[arg(long)]
    pub baseline: Option<String>,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[arg(long, value_enum)]
    pub phase: PhaseArg,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    pub name: String,
    #[arg(long, default_value = "all")]
    pub select: String,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Args)]
pub struct CandidateArgs {
    /// Minimum number of distinct teams; the profile setting otherwise.
    #[arg(long)]
    pub threshold: Option<usize>,
    /// First journal sequence number to mine.
    #[arg(long)]
    pub since: Option<u64>,
    /// Last journal sequence number to mine.
    #[arg(long)]
    pub until: Option<u64>,
    #[arg(long, value_enum, default_value = "development")]
    pub phase: PhaseArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Horizontal,
    Vertical,
}

#[derive(Debug, Args)]
pub struct PromoteArgs {
    pub id: String,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Profile that receives the stricter policy and extra checks.
    #[arg(long, value_enum, default_value = "development")]
    pub phase: PhaseArg,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct EvolveArgs {
    /// Migration plan JSON.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Target schema JSON; the plan is derived from the difference.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long, value_enum)]
    pub phase: PhaseArg,
    /// JSON file holding a list of adjustments.
    #[arg(long)]
    pub adjust: Option<PathBuf>,
    #[arg(long, value_name = "CHECK=SEVERITY")]
    pub severity: Vec<String>,
    #[arg(long, value_name = "CHECK")]
    pub enable: Vec<String>,
    #[arg(long, value_name = "CHECK")]
    pub disable: Vec<String>,
    /// Versioning policy as `SELECTOR=MODE`, or `default=MODE`.
    #[arg(long, value_name = "SELECTOR=MODE")]
    pub policy: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_enum)]
    pub phase: Option<PhaseArg>,
}

#[derive(Debug, Args)]
pub struct JournalArgs {
    #[arg(long)]
    pub actor: Option<String>,
    #[arg(long = "by-team")]
    pub by_team: Option<String>,
    #[arg(long)]
    pub subject: Option<String>,
    /// Entries after this sequence number.
    #[arg(long)]
    pub since: Option<u64>,
    /// Artifacts and links likely affected by a change set.
    #[arg(long, value_name = "CHANGE_SET")]
    pub impact: Option<String>,
    /// Rebuild the state from the journal and compare hashes.
    #[arg(long)]
    pub verify: bool,
}
