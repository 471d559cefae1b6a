//! Parallel block assembly and diagonalisation. Work is split per azimuthal
//! block and collected in ascending `m`, so results match the sequential
//! core routines bit for bit.

use rayon::prelude::*;
use spinheat_core::basis::azimuthal_indices;
use spinheat_core::heat::Spectrum;
use spinheat_core::operators::{assemble_block, BlockSet, DeformationConfig};
use spinheat_core::Result;

pub fn assemble(cfg: &DeformationConfig) -> Result<BlockSet> {
    cfg.validate()?;
    let rule = cfg.rule()?;
    let ms: Vec<_> = azimuthal_indices(cfg.n_trunc).collect();
    let blocks = ms.par_iter().map(|&m| assemble_block(cfg, m, &rule)).collect::<Result<Vec<_>>>()?;
    Ok(BlockSet::from_blocks(cfg.clone(), blocks))
}

pub fn spectrum(set: &BlockSet) -> Result<Spectrum> {
    let per_block = set.blocks.par_iter().map(|b| b.eigenvalues(&set.cfg.tol)).collect::<Result<Vec<_>>>()?;
    Ok(Spectrum { gamma: set.gamma(), per_block })
}

/// `value(σ)` over a grid, evaluated concurrently, in grid order.
pub fn map_grid<T: Send>(grid: &[f64], value: impl Fn(f64) -> T + Sync + Send) -> Vec<T> {
    grid.par_iter().map(|&s| value(s)).collect()
}

/// Honour `SPINHEAT_THREADS` if set; otherwise rayon's default.
pub fn init_threads() -> std::result::Result<(), String> {
    match std::env::var("SPINHEAT_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| format!("SPINHEAT_THREADS={v} is not a thread count"))?;
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
        }
        Err(_) => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use spinheat_core::operators::ScalarDatum;

    #[test]
    fn parallel_matches_sequential() {
        let cfg = DeformationConfig::new(9, 0.7, ScalarDatum::new(vec![0.0, 1.0, 0.5]).unwrap()).unwrap();
        let seq = BlockSet::assemble(&cfg).unwrap();
        let par = assemble(&cfg).unwrap();
        assert_eq!(seq, par);
        assert_eq!(Spectrum::compute(&seq).unwrap(), spectrum(&par).unwrap());
    }
}
