//! `gen`: write instance files plus a manifest with recomputed ratios.

use std::fs;
use std::path::Path;

use anyhow::{bail, Result};
use obm::{gen_adversarial_pair, gen_random, Instance, RandomParams};

use crate::common::{fmt, write_csv};

pub struct GenArgs {
    pub adversarial: bool,
    pub random: bool,
    pub kappa: f64,
    pub m: usize,
    pub eps: f64,
    pub count: usize,
    pub u: usize,
    pub v: usize,
    pub degree: f64,
    pub cap: (f64, f64),
    pub load: (f64, f64),
    pub rate: (f64, f64),
}

pub fn cmd_gen(out_dir: &Path, seed: u64, args: &GenArgs) -> Result<()> {
    let mut named: Vec<(String, Instance)> = Vec::new();
    if args.adversarial {
        let (high, zero) = gen_adversarial_pair(args.kappa, args.m, args.eps)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let stem = format!("adv_k{:.4}_m{}", args.kappa, args.m);
        named.push((format!("{stem}_high"), high));
        named.push((format!("{stem}_zero"), zero));
    }
    if args.random {
        let params = RandomParams {
            u_count: args.u,
            v_count: args.v,
            mean_degree: args.degree,
            capacity_range: args.cap,
            load_range: args.load,
            rate_range: args.rate,
        };
        for i in 0..args.count {
            let inst =
                gen_random(seed.wrapping_add(i as u64), &params).map_err(|e| anyhow::anyhow!("{e}"))?;
            named.push((format!("rand_{seed}_{i:04}"), inst));
        }
    }
    if named.is_empty() {
        bail!("nothing to generate: pass --adversarial and/or --random");
    }

    let inst_dir = out_dir.join("instances");
    fs::create_dir_all(&inst_dir)?;
    let mut manifest = Vec::with_capacity(named.len());
    for (id, inst) in &named {
        inst.write_json(&inst_dir.join(format!("{id}.json")))
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let generator = inst.meta().generator.clone().unwrap_or_default();
        manifest.push(vec![id.clone(), generator, fmt(inst.bid_budget_ratio())]);
    }
    write_csv(out_dir, "manifest.csv", &["id", "generator", "kappa"], &manifest)?;
    println!("wrote {} instances to {:?}", named.len(), inst_dir);
    Ok(())
}
