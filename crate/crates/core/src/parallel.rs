//! Data-parallel helpers. With the `parallel` feature the maps run on the
//! rayon pool; without it, or with [`Execution::Sequential`], they run in
//! index order on the calling thread. Results are always assembled in index
//! order, so output is bitwise identical either way.

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Like [`map_indexed`], returning the error of the lowest failing index.
pub fn try_map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(n, exec, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::FloquetError;

    #[test]
    fn both_modes_agree_and_report_first_error() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(
            map_indexed(1000, Execution::Sequential, f),
            map_indexed(1000, Execution::Parallel, f)
        );
        let g = |i: usize| {
            if i % 7 == 3 {
                Err(FloquetError::InvalidInput(format!("{i}")))
            } else {
                Ok(i)
            }
        };
        let err = try_map_indexed(100, Execution::Parallel, g).unwrap_err();
        assert_eq!(err, FloquetError::InvalidInput("3".into()));
    }
}
