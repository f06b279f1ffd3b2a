use std::collections::BTreeMap;

use ndarray::Array3;

use super::DataSource;
use crate::grid::{Grid4D, ScalarVolume};
use crate::{Error, Result};

/// Volumes held in memory, one per (variable, step).
#[derive(Debug, Clone)]
pub struct MemorySource {
    grid: Grid4D,
    data: BTreeMap<String, Vec<Array3<f64>>>,
    order: Vec<String>,
}

impl MemorySource {
    pub fn new(grid: Grid4D) -> Self {
        MemorySource {
            grid,
            data: BTreeMap::new(),
            order: Vec::new(),
        }
    }

    /// Adds a variable; `steps` must hold one volume per time step.
    pub fn with_variable(mut self, name: &str, steps: Vec<Array3<f64>>) -> Result<Self> {
        let [nt, nd, ny, nx] = self.grid.shape();
        if steps.len() != nt || steps.iter().any(|a| a.dim() != (nd, ny, nx)) {
            return Err(Error::InvalidInput(format!(
                "variable '{name}' does not match grid shape {:?}",
                self.grid.shape()
            )));
        }
        if !self.data.contains_key(name) {
            self.order.push(name.to_string());
        }
        self.data.insert(name.to_string(), steps);
        Ok(self)
    }

    /// Builds a source from already-materialised volumes.
    pub fn from_volumes(grid: Grid4D, vars: Vec<(&str, Vec<ScalarVolume>)>) -> Result<Self> {
        vars.into_iter().try_fold(MemorySource::new(grid), |src, (name, vols)| {
            src.with_variable(name, vols.into_iter().map(ScalarVolume::into_values).collect())
        })
    }
}

impl DataSource for MemorySource {
    fn grid(&self) -> &Grid4D {
        &self.grid
    }

    fn variables(&self) -> Vec<String> {
        self.order.clone()
    }

    fn read(&self, t: usize, variable: &str) -> Result<Array3<f64>> {
        let steps = self
            .data
            .get(variable)
            .ok_or_else(|| Error::NotFound(format!("variable '{variable}'")))?;
        steps.get(t).cloned().ok_or(Error::Bounds {
            what: "time axis",
            index: t,
            len: steps.len(),
        })
    }

    fn source_bytes(&self, variables: &[String]) -> u64 {
        let [nt, nd, ny, nx] = self.grid.shape();
        (variables.len() * nt * nd * ny * nx * 4) as u64
    }
}

type Generator = dyn Fn(usize, &str, &Grid4D) -> Result<Array3<f64>> + Send + Sync;

/// Volumes generated on demand by a closure `(t, variable, grid)`.
pub struct FnSource {
    grid: Grid4D,
    variables: Vec<String>,
    generate: Box<Generator>,
}

impl FnSource {
    pub fn new(
        grid: Grid4D,
        variables: Vec<String>,
        generate: impl Fn(usize, &str, &Grid4D) -> Result<Array3<f64>> + Send + Sync + 'static,
    ) -> Self {
        FnSource {
            grid,
            variables,
            generate: Box::new(generate),
        }
    }
}

impl DataSource for FnSource {
    fn grid(&self) -> &Grid4D {
        &self.grid
    }

    fn variables(&self) -> Vec<String> {
        self.variables.clone()
    }

    fn read(&self, t: usize, variable: &str) -> Result<Array3<f64>> {
        if !self.variables.iter().any(|v| v == variable) {
            return Err(Error::NotFound(format!("variable '{variable}'")));
        }
        (self.generate)(t, variable, &self.grid)
    }

    fn source_bytes(&self, variables: &[String]) -> u64 {
        let [nt, nd, ny, nx] = self.grid.shape();
        (variables.len() * nt * nd * ny * nx * 4) as u64
    }
}
