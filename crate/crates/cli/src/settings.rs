use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use shadowdrive::posture::PostureTemplate;
use shadowdrive::session::SessionSetup;
use shadowdrive::stroke::ExpertPath;
use shadowdrive::Config;

use crate::SettingsArgs;

/// Defaults, then the config file, then `--set` overrides.
pub fn load_config(args: &SettingsArgs) -> Result<Config> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Config::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => Config::default(),
    };
    for item in &args.overrides {
        let Some((key, value)) = item.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{item}`");
        };
        config.set(key.trim(), value.trim())?;
    }
    config.engine.validate()?;
    Ok(config)
}

fn open(path: &Path, what: &str) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {what} {}", path.display()))?;
    Ok(BufReader::new(file))
}

/// Templates from the configured paths, or the bundled ones.
pub fn load_setup(config: &Config) -> Result<Arc<SessionSetup>> {
    let posture = match &config.posture_template {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("opening posture template {}", path.display()))?;
            PostureTemplate::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => PostureTemplate::default(),
    };
    let path = match &config.expert_path {
        Some(path) => ExpertPath::load(open(path, "expert path")?).with_context(|| format!("in {}", path.display()))?,
        None => ExpertPath::default(),
    };
    Ok(Arc::new(SessionSetup::new(config.engine.clone(), posture, path)?))
}
