//! Named parameter tensors with gradient buffers and optimizer slots.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Optimizer group: the text encoder or the graph decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Encoder,
    Decoder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub group: Group,
    pub frozen: bool,
    /// First and second Adam moments.
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn add(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        value: Vec<f64>,
        group: Group,
    ) -> ParamId {
        let name = name.into();
        assert_eq!(value.len(), rows * cols, "parameter {name}");
        assert!(
            self.params.iter().all(|p| p.name != name),
            "parameter {name} registered twice"
        );
        let n = value.len();
        self.params.push(Param {
            name,
            rows,
            cols,
            value,
            grad: vec![0.0; n],
            group,
            frozen: false,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn ids(&self) -> Vec<ParamId> {
        (0..self.params.len()).map(ParamId).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}
