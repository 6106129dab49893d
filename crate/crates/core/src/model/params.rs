use serde::{Deserialize, Serialize};

/// Index of a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    /// Trainability group this tensor belongs to.
    pub group: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Flat list of every learnable tensor in a model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, group: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> ParamId {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.params.push(Param {
            name: name.into(),
            group: group.into(),
            shape,
            values,
        });
        ParamId(self.params.len() - 1)
    }

    #[inline]
    pub fn values(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].values
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn find_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    /// Number of scalar parameters, optionally restricted to one group.
    pub fn count(&self, group: Option<&str>) -> usize {
        self.params
            .iter()
            .filter(|p| group.is_none_or(|g| p.group == g))
            .map(|p| p.values.len())
            .sum()
    }

    /// Group names in first-appearance order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.params {
            if !out.contains(&p.group) {
                out.push(p.group.clone());
            }
        }
        out
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            values: self.params.iter().map(|p| vec![0.0; p.values.len()]).collect(),
        }
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    values: Vec<Vec<f64>>,
}

impl Gradients {
    #[inline]
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.values[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.values[id.0]
    }

    pub fn by_index(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn by_index_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }
}
