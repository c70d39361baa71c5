//! Method config resolution: preset, then config file, then flags.

use std::path::Path;

use synwmd::{Error, MethodConfig, Preset};

use crate::args::MethodArgs;

const DEFAULT_PRESET: Preset = Preset::SynwmdFull;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Returns the preset the config started from and the resolved config.
pub fn resolve(args: &MethodArgs) -> Result<(Preset, MethodConfig), Error> {
    let file = match &args.config {
        Some(path) => Some(read_table(path)?),
        None => None,
    };
    resolve_with(args, file)
}

fn read_table(path: &Path) -> Result<toml::Table, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| config_err(format!("{}: {e}", path.display())))
}

pub fn resolve_with(args: &MethodArgs, file: Option<toml::Table>) -> Result<(Preset, MethodConfig), Error> {
    let mut file = file.unwrap_or_default();
    let file_preset = match file.remove("method") {
        Some(toml::Value::String(s)) => Some(s),
        Some(other) => return Err(config_err(format!("method must be a string, got {other}"))),
        None => None,
    };
    let preset: Preset = match args.method.as_deref().or(file_preset.as_deref()) {
        Some(name) => name.parse()?,
        None => DEFAULT_PRESET,
    };

    let mut table = toml::Table::try_from(preset.config()).map_err(|e| config_err(e.to_string()))?;
    for (key, value) in file {
        if !table.contains_key(&key) {
            return Err(config_err(format!("unknown config key {key:?}")));
        }
        table.insert(key, value);
    }
    let mut cfg: MethodConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| config_err(e.message().to_owned()))?;

    if let Some(v) = &args.flow {
        cfg.flow = v.parse()?;
    }
    if let Some(v) = &args.context {
        cfg.context = v.parse()?;
    }
    if let Some(v) = &args.metric {
        cfg.metric = v.parse()?;
    }
    if let Some(v) = &args.graph_mode {
        cfg.graph_mode = v.parse()?;
    }
    if let Some(v) = &args.oov {
        cfg.oov = v.parse()?;
    }
    if let Some(v) = &args.subtree_weighting {
        cfg.subtree_weighting = v.parse()?;
    }
    if let Some(v) = &args.aggregation {
        cfg.aggregation = v.parse()?;
    }
    cfg.a = args.a.unwrap_or(cfg.a);
    cfg.d = args.d.unwrap_or(cfg.d);
    cfg.n = args.n.unwrap_or(cfg.n);
    cfg.m = args.m.unwrap_or(cfg.m);
    cfg.whiten = args.whiten.unwrap_or(cfg.whiten);
    cfg.validate()?;
    Ok((preset, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use synwmd::{ContextMode, FlowScheme, Metric};

    fn table(s: &str) -> Option<toml::Table> {
        Some(s.parse().unwrap())
    }

    #[test]
    fn presets_by_name() {
        let args = MethodArgs { method: Some("wmd-cos-idf".into()), ..Default::default() };
        let (_, cfg) = resolve_with(&args, None).unwrap();
        assert_eq!((cfg.flow, cfg.context, cfg.metric), (FlowScheme::Idf, ContextMode::None, Metric::Cosine));

        let (p, cfg) = resolve_with(&MethodArgs::default(), None).unwrap();
        assert_eq!(p, Preset::SynwmdFull);
        assert_eq!((cfg.flow, cfg.context, cfg.n, cfg.m, cfg.d), (FlowScheme::Swf, ContextMode::Subtree, 3, 3, 0.2));
    }

    #[test]
    fn flags_beat_file_beat_preset() {
        let file = table("method = \"wmd-l2\"\na = 0.7\nn = 2\n");
        let args = MethodArgs { a: Some(0.4), ..Default::default() };
        let (p, cfg) = resolve_with(&args, file).unwrap();
        assert_eq!(p, Preset::WmdL2);
        assert_eq!((cfg.a, cfg.n, cfg.metric), (0.4, 2, Metric::L2));

        let args = MethodArgs { method: Some("synwmd-cls".into()), ..Default::default() };
        let (p, cfg) = resolve_with(&args, table("method = \"wmd-l2\"\n")).unwrap();
        assert_eq!((p, cfg.a), (Preset::SynwmdCls, 0.1));
    }

    #[test]
    fn bad_config() {
        assert!(resolve_with(&MethodArgs::default(), table("bogus = 1\n")).is_err());
        assert!(resolve_with(&MethodArgs::default(), table("a = \"x\"\n")).is_err());
        let args = MethodArgs { d: Some(1.5), ..Default::default() };
        assert!(matches!(resolve_with(&args, None), Err(Error::Config(_))));
        let args = MethodArgs { method: Some("nope".into()), ..Default::default() };
        assert!(resolve_with(&args, None).is_err());
    }
}
