use std::collections::BTreeMap;

use anyhow::{Context, Result};
use rayon::prelude::*;
use scarmap_core::dataset::Mode;
use scarmap_core::io::derive_seed;
use scarmap_core::substrate::{gen_substrate, reference_mix, save_tensor_field, FieldKind};
use serde_json::json;

use super::file_name;
use crate::stage::{sim_stem, Entry, Stage, StageManifest};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// HeI, HoA, HeA, or C for the reference mix of all three.
    #[arg(long, default_value = "C")]
    pub mode: Mode,
    #[arg(long)]
    pub count: usize,
}

/// Simulation ids and kinds, numbered from 0 in HeI, HoA, HeA order.
pub fn plan(mode: Mode, count: usize) -> Vec<(u32, FieldKind)> {
    let groups = match mode {
        Mode::C => reference_mix(count),
        Mode::HeI => vec![(FieldKind::HeI, count)],
        Mode::HoA => vec![(FieldKind::HoA, count)],
        Mode::HeA => vec![(FieldKind::HeA, count)],
    };
    groups
        .into_iter()
        .flat_map(|(k, c)| std::iter::repeat_n(k, c))
        .enumerate()
        .map(|(i, k)| (i as u32, k))
        .collect()
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<()> {
    let cfg = &ctx.cfg.substrate;
    let plan = plan(args.mode, args.count);
    let dir = ctx.ws.prepare_output(Stage::Substrates)?;
    let entries = plan
        .par_iter()
        .map(|&(id, kind)| -> Result<Entry> {
            let seed = derive_seed(ctx.seed, &[u64::from(id)]);
            let s = gen_substrate(kind, seed, cfg)
                .with_context(|| format!("substrate {id} ({kind})"))?;
            let path = save_tensor_field(
                &dir.join(sim_stem(id)),
                &s.tensor,
                Some(seed),
                json!({ "kind": kind, "substrate": cfg }),
                s.scar.as_ref().map(|m| &m.mask),
            )?;
            let mut info = BTreeMap::new();
            if let Some(m) = &s.scar {
                info.insert("scar_fraction".to_string(), json!(m.fraction()));
            }
            Ok(Entry {
                sim_id: id,
                kind,
                seed,
                file: Some(file_name(&path)),
                info,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut m = StageManifest::new(
        Stage::Substrates,
        ctx.seed,
        json!({ "mode": args.mode, "count": args.count, "substrate": cfg }),
    );
    m.entries = entries;
    ctx.ws.save(Stage::Substrates, &m)?;
    let tally: Vec<String> = FieldKind::ALL
        .iter()
        .map(|k| format!("{k} {}", plan.iter().filter(|p| p.1 == *k).count()))
        .collect();
    println!(
        "wrote {} substrates ({}) to {}",
        plan.len(),
        tally.join(", "),
        dir.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_numbers_sims_by_kind() {
        let p = plan(Mode::C, 6);
        assert_eq!(p.len(), 6);
        assert!(p.iter().enumerate().all(|(i, s)| s.0 == i as u32));
        assert!(p.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(plan(Mode::HoA, 0).is_empty());
        assert!(plan(Mode::HeA, 3).iter().all(|s| s.1 == FieldKind::HeA));
    }
}
