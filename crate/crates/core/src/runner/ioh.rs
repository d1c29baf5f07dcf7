//! Export to the IOHprofiler text layout read by IOHanalyzer.
//!
//! For each (function, dimension) pair there is one index file
//! `IOHprofiler_f{fid}_DIM{n}.info` with one three-line block per run, and
//! one data file per run under `data_f{fid}_{name}/`. The y values are
//! fractions of correct bits, so runs of different versions and instances
//! share one scale. See `docs/FORMATS.md` for a worked example.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::output::write_atomic;
use super::{describe, RunRecord};
use crate::error::{Error, Result};

pub const DAT_HEADER: &str = "\"function evaluation\" \"current f(x)\" \"best-so-far f(x)\"";

/// Files written by [`export_ioh`], relative to the export directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IohExport {
    pub index_files: Vec<PathBuf>,
    pub data_files: Vec<PathBuf>,
}

fn function_name(r: &RunRecord) -> String {
    format!("DBV_{}", r.version.name())
}

fn data_rel_path(r: &RunRecord) -> String {
    let fid = r.version.function_id();
    format!(
        "data_f{fid}_{}/IOHprofiler_f{fid}_DIM{}_run{:06}.dat",
        function_name(r),
        r.n,
        r.ordinal
    )
}

fn dat_file(r: &RunRecord) -> String {
    let mut s = String::from(DAT_HEADER);
    s.push('\n');
    let res = &r.result;
    for p in &res.trajectory {
        s.push_str(&format!(
            "{} {:.6} {:.6}\n",
            p.evaluations, p.best_fraction_correct, p.best_fraction_correct
        ));
    }
    let last = res.final_best_so_far();
    s.push_str(&format!("{} {:.6} {:.6}\n", res.evals_used, last, last));
    s
}

fn index_block(r: &RunRecord) -> String {
    let fid = r.version.function_id();
    format!(
        "suite = 'DBV', funcId = {fid}, funcName = '{}', DIM = {}, maximization = 'T', algId = 'GA_cell{}', algInfo = '{}'\n\
         % instance {} run {} seed {}\n\
         {}, {}:{}|{:.6}\n",
        function_name(r),
        r.n,
        r.cell,
        describe(&r.params),
        r.instance,
        r.run,
        r.seeds.master_seed,
        data_rel_path(r),
        r.instance,
        r.result.evals_used,
        r.result.final_best_so_far()
    )
}

/// Writes the IOHprofiler folder for `records` into `dir`.
pub fn export_ioh(records: &[RunRecord], dir: &Path) -> Result<IohExport> {
    if records.is_empty() {
        return Err(Error::contract("no records to export"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut groups: BTreeMap<(u32, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.version.function_id(), r.n)).or_default().push(r);
    }
    let mut out = IohExport::default();
    for ((fid, n), mut runs) in groups {
        runs.sort_by_key(|r| r.ordinal);
        let mut index = String::new();
        for r in runs {
            let rel = PathBuf::from(data_rel_path(r));
            let path = dir.join(&rel);
            let parent = path.parent().expect("data path has a parent");
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            write_atomic(&path, dat_file(r).as_bytes())?;
            out.data_files.push(rel);
            index.push_str(&index_block(r));
        }
        let rel = PathBuf::from(format!("IOHprofiler_f{fid}_DIM{n}.info"));
        write_atomic(&dir.join(&rel), index.as_bytes())?;
        out.index_files.push(rel);
    }
    Ok(out)
}
