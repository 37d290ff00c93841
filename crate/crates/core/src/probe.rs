//! Single-neuron probes for error-retention checks.
//!
//! `EventNeuron` is a scalar toy model of one event neuron (weighted-sum g,
//! identity or relu f) with instrumented input/output sums, used to verify
//! the state identities
//!
//!   a(T) = a(0) + g(sum of incoming deltas)
//!   d(T) = f(a(T)) - f(a(0)) - sum of transmitted deltas
//!
//! for arbitrary schedules and arbitrary firing decisions. The probe runs in
//! f64: it verifies update algebra, not tensor arithmetic, which stays f32
//! everywhere else.
//!
//! `ForgetfulNeuron` is the memoryless alternative: it transmits the
//! frame-to-frame difference when it exceeds the threshold and discards it
//! otherwise, so sub-threshold drift is silently lost.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn apply(&self, v: f64) -> f64 {
        match self {
            Self::Identity => v,
            Self::Relu => v.max(0.0),
        }
    }
}

/// Scalar event neuron with state (a, b, d) and instrumented sums.
#[derive(Debug, Clone)]
pub struct EventNeuron {
    weights: Vec<f64>,
    activation: Activation,
    a: f64,
    b: f64,
    d: f64,
    a0: f64,
    sum_din: Vec<f64>,
    sum_dout: f64,
}

impl EventNeuron {
    /// State starts internally consistent: a = a0, b = f(a0), d = 0.
    pub fn new(weights: Vec<f64>, activation: Activation, a0: f64) -> Self {
        let n = weights.len();
        Self {
            weights,
            activation,
            a: a0,
            b: activation.apply(a0),
            d: 0.0,
            a0,
            sum_din: vec![0.0; n],
            sum_dout: 0.0,
        }
    }

    pub fn state(&self) -> (f64, f64, f64) {
        (self.a, self.b, self.d)
    }

    pub fn transmitted_total(&self) -> f64 {
        self.sum_dout
    }

    fn g(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    /// Apply one update step: a += g(din); d += f(a) - b; b = f(a). When
    /// `fire` is set the neuron transmits its whole d and resets it.
    /// Returns the transmitted delta, if any.
    pub fn step(&mut self, din: &[f64], fire: bool) -> Option<f64> {
        assert_eq!(din.len(), self.weights.len(), "input arity mismatch");
        self.a += self.g(din);
        for (s, v) in self.sum_din.iter_mut().zip(din) {
            *s += v;
        }
        let fa = self.activation.apply(self.a);
        self.d += fa - self.b;
        self.b = fa;
        if fire && self.d != 0.0 {
            let out = self.d;
            self.d = 0.0;
            self.sum_dout += out;
            Some(out)
        } else {
            None
        }
    }

    /// Threshold-driven step: fire iff |d| > h after the update.
    pub fn step_threshold(&mut self, din: &[f64], h: f64) -> Option<f64> {
        self.a += self.g(din);
        for (s, v) in self.sum_din.iter_mut().zip(din) {
            *s += v;
        }
        let fa = self.activation.apply(self.a);
        self.d += fa - self.b;
        self.b = fa;
        if self.d.abs() > h {
            let out = self.d;
            self.d = 0.0;
            self.sum_dout += out;
            Some(out)
        } else {
            None
        }
    }

    /// Largest violation of the two retention identities.
    pub fn retention_violation(&self) -> f64 {
        let expected_a = self.a0 + self.g(&self.sum_din);
        let v_a = (self.a - expected_a).abs();
        let expected_d =
            self.activation.apply(self.a) - self.activation.apply(self.a0) - self.sum_dout;
        let v_d = (self.d - expected_d).abs();
        v_a.max(v_d)
    }

    /// Error between what downstream believes (f(a0) + transmitted) and the
    /// neuron's actual activation.
    pub fn downstream_error(&self) -> f64 {
        (self.activation.apply(self.a0) + self.sum_dout) - self.activation.apply(self.a)
    }
}

/// Memoryless neuron: transmits the frame-to-frame activation difference
/// when it exceeds the threshold, discards it otherwise.
#[derive(Debug, Clone)]
pub struct ForgetfulNeuron {
    previous: f64,
    initial: f64,
    sum_dout: f64,
}

impl ForgetfulNeuron {
    pub fn new(initial: f64) -> Self {
        Self { previous: initial, initial, sum_dout: 0.0 }
    }

    /// Present a new activation value; transmit the step difference iff it
    /// exceeds `h`. The untransmitted remainder is not stored anywhere.
    pub fn step(&mut self, activation: f64, h: f64) -> Option<f64> {
        let diff = activation - self.previous;
        self.previous = activation;
        if diff.abs() > h {
            self.sum_dout += diff;
            Some(diff)
        } else {
            None
        }
    }

    /// Error between the transmitted state and the actual activation.
    pub fn downstream_error(&self) -> f64 {
        (self.initial + self.sum_dout) - self.previous
    }
}
