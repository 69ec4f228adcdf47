/// Table factor over a set of variables; the last variable varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn scalar(value: f64) -> Self {
        Self {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.contains(&var)
    }

    fn strides(cards: &[usize]) -> Vec<usize> {
        let mut s = vec![1; cards.len()];
        for i in (0..cards.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * cards[i + 1];
        }
        s
    }

    /// Fixes observed variables and drops them from the scope.
    pub fn restrict(&self, evidence: &[Option<usize>]) -> Self {
        if self.vars.iter().all(|&v| evidence[v].is_none()) {
            return self.clone();
        }
        let strides = Self::strides(&self.cards);
        let mut base = 0;
        let mut vars = Vec::new();
        let mut cards = Vec::new();
        let mut free_strides = Vec::new();
        for (i, &v) in self.vars.iter().enumerate() {
            match evidence[v] {
                Some(s) => base += s * strides[i],
                None => {
                    vars.push(v);
                    cards.push(self.cards[i]);
                    free_strides.push(strides[i]);
                }
            }
        }
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut counter = vec![0usize; cards.len()];
        let mut idx = base;
        for _ in 0..size {
            values.push(self.values[idx]);
            for d in (0..cards.len()).rev() {
                counter[d] += 1;
                idx += free_strides[d];
                if counter[d] < cards[d] {
                    break;
                }
                idx -= free_strides[d] * cards[d];
                counter[d] = 0;
            }
        }
        Self { vars, cards, values }
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (i, &v) in other.vars.iter().enumerate() {
            if !vars.contains(&v) {
                vars.push(v);
                cards.push(other.cards[i]);
            }
        }
        let sa = Self::strides(&self.cards);
        let sb = Self::strides(&other.cards);
        let stride_in = |own: &[usize], strides: &[usize], v: usize| {
            own.iter().position(|&x| x == v).map(|p| strides[p]).unwrap_or(0)
        };
        let step_a: Vec<usize> = vars.iter().map(|&v| stride_in(&self.vars, &sa, v)).collect();
        let step_b: Vec<usize> = vars.iter().map(|&v| stride_in(&other.vars, &sb, v)).collect();

        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut counter = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            for d in (0..vars.len()).rev() {
                counter[d] += 1;
                ia += step_a[d];
                ib += step_b[d];
                if counter[d] < cards[d] {
                    break;
                }
                ia -= step_a[d] * cards[d];
                ib -= step_b[d] * cards[d];
                counter[d] = 0;
            }
        }
        Self { vars, cards, values }
    }

    pub fn sum_out(&self, var: usize) -> Self {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let out_strides = Self::strides(&cards);
        // Stride of each source dimension inside the output table.
        let step: Vec<usize> = (0..self.vars.len())
            .map(|d| match d.cmp(&pos) {
                std::cmp::Ordering::Less => out_strides[d],
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Greater => out_strides[d - 1],
            })
            .collect();
        let size: usize = cards.iter().product();
        let mut values = vec![0.0; size.max(1)];
        let mut counter = vec![0usize; self.vars.len()];
        let mut out = 0usize;
        for &x in &self.values {
            values[out] += x;
            for d in (0..self.vars.len()).rev() {
                counter[d] += 1;
                out += step[d];
                if counter[d] < self.cards[d] {
                    break;
                }
                out -= step[d] * self.cards[d];
                counter[d] = 0;
            }
        }
        Self { vars, cards, values }
    }
}
