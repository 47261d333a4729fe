//! Textual references to playable agents.
//!
//! ```text
//! hipt:<dir>/<name>           HiPT checkpoint <dir>/<name>.model + .json
//! bc:<dir>/<name>             behavior-cloned model
//! member:<pop_dir>#<i>:<tier> population member i at tier full|mid|random
//! scripted | random | stay    built-in policies
//! ```

use std::path::{Path, PathBuf};

use hipt_core::eval::BcModel;
use hipt_core::hipt::load_hipt_checkpoint;
use hipt_core::policy::{Policy, StayPolicy, UniformPolicy};
use hipt_core::population::{load_population, Tier};
use hipt_core::scripted::ScriptedCook;

use crate::rundir::verify_enclosing_run;

pub type BoxedPolicy = Box<dyn Policy + Send>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AgentRef {
    Hipt { dir: PathBuf, name: String },
    Bc { dir: PathBuf, name: String },
    Member { dir: PathBuf, index: usize, tier: Tier },
    Scripted,
    Random,
    Stay,
}

fn split_dir_name(rest: &str) -> Result<(PathBuf, String), String> {
    let path = Path::new(rest);
    let name = path.file_name().and_then(|n| n.to_str()).ok_or_else(|| format!("no file name in {rest:?}"))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((dir, name.to_string()))
}

fn parse_tier(s: &str) -> Result<Tier, String> {
    Tier::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| format!("unknown tier {s:?}"))
}

impl std::str::FromStr for AgentRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "scripted" => return Ok(AgentRef::Scripted),
            "random" => return Ok(AgentRef::Random),
            "stay" => return Ok(AgentRef::Stay),
            _ => {}
        }
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("unrecognized agent reference {s:?}"))?;
        match kind {
            "hipt" => split_dir_name(rest).map(|(dir, name)| AgentRef::Hipt { dir, name }),
            "bc" => split_dir_name(rest).map(|(dir, name)| AgentRef::Bc { dir, name }),
            "member" => {
                let (dir, sel) =
                    rest.rsplit_once('#').ok_or_else(|| format!("expected <dir>#<index>:<tier> in {s:?}"))?;
                let (index, tier) = sel.split_once(':').unwrap_or((sel, "full"));
                let index = index.parse().map_err(|_| format!("bad member index in {s:?}"))?;
                Ok(AgentRef::Member { dir: PathBuf::from(dir), index, tier: parse_tier(tier)? })
            }
            _ => Err(format!("unknown agent kind {kind:?}")),
        }
    }
}

impl AgentRef {
    /// Load the policy, checking any enclosing run manifest first.
    pub fn load(&self) -> anyhow::Result<BoxedPolicy> {
        Ok(match self {
            AgentRef::Hipt { dir, name } => {
                verify_enclosing_run(dir)?;
                let (agent, _) = load_hipt_checkpoint(dir, name)?;
                Box::new(agent.policy())
            }
            AgentRef::Bc { dir, name } => {
                verify_enclosing_run(dir)?;
                Box::new(BcModel::load(dir, name)?.policy())
            }
            AgentRef::Member { dir, index, tier } => {
                verify_enclosing_run(dir)?;
                let pop = load_population(dir)?;
                anyhow::ensure!(*index < pop.len(), "population at {} has {} members", dir.display(), pop.len());
                Box::new(pop.policy(*index, *tier))
            }
            AgentRef::Scripted => Box::new(ScriptedCook),
            AgentRef::Random => Box::new(UniformPolicy),
            AgentRef::Stay => Box::new(StayPolicy),
        })
    }
}
