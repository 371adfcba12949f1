//! Built-in programs with triggering inputs.

use super::exec::{symbolic_single_path, SinkState};
use super::{ToyError, ToyInput, ToyProgram};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    pub source: &'static str,
    pub input: &'static [(&'static str, u64)],
    /// The sink analyzed by default.
    pub sink: &'static str,
    /// Too wide for the internal enumerator.
    pub needs_external: bool,
}

const MOTEX_8: &str = include_str!("../../fixtures/motex-8bit.toy");
const MOTEX_64: &str = include_str!("../../fixtures/motex-64bit.toy");

const FIXTURES: &[Fixture] = &[
    Fixture {
        name: "motex1-8bit",
        description: "length underflow: size wraps to the top of the range",
        source: MOTEX_8,
        input: &[("input_size", 3), ("header", 0)],
        sink: "overflow",
        needs_external: false,
    },
    Fixture {
        name: "motex2-8bit",
        description: "uninitialized size aliasing the checked header",
        source: MOTEX_8,
        input: &[("input_size", 25), ("header", 30)],
        sink: "overflow",
        needs_external: false,
    },
    Fixture {
        name: "motex1-64bit",
        description: "length underflow at full width",
        source: MOTEX_64,
        input: &[("input_size", 3), ("header", 0)],
        sink: "overflow",
        needs_external: true,
    },
    Fixture {
        name: "motex2-64bit",
        description: "uninitialized size aliasing the header at full width",
        source: MOTEX_64,
        input: &[("input_size", 300), ("header", 280)],
        sink: "overflow",
        needs_external: true,
    },
    Fixture {
        name: "listing3-8bit",
        description: "tainted sinks pinned to one value by the path",
        source: include_str!("../../fixtures/listing3-8bit.toy"),
        input: &[("inp", 0)],
        sink: "line8",
        needs_external: false,
    },
    Fixture {
        name: "mul-8bit",
        description: "doubling: even values, bit 0 fixed",
        source: include_str!("../../fixtures/mul-8bit.toy"),
        input: &[("i", 3)],
        sink: "product",
        needs_external: false,
    },
    Fixture {
        name: "even-8bit",
        description: "even values selected by a branch",
        source: include_str!("../../fixtures/even-8bit.toy"),
        input: &[("i", 4)],
        sink: "value",
        needs_external: false,
    },
    Fixture {
        name: "copy-8bit",
        description: "input copied through memory, unconstrained",
        source: include_str!("../../fixtures/copy-8bit.toy"),
        input: &[("i", 7)],
        sink: "copy",
        needs_external: false,
    },
    Fixture {
        name: "holes-8bit",
        description: "values below 200 that are not multiples of 5",
        source: include_str!("../../fixtures/holes-8bit.toy"),
        input: &[("i", 7)],
        sink: "value",
        needs_external: false,
    },
    Fixture {
        name: "pinned-8bit",
        description: "sink under a branch forcing the value to 0",
        source: include_str!("../../fixtures/pinned-8bit.toy"),
        input: &[("x", 0)],
        sink: "zero",
        needs_external: false,
    },
    Fixture {
        name: "mixdup-16bit",
        description: "one byte duplicated into a word",
        source: include_str!("../../fixtures/mixdup-16bit.toy"),
        input: &[("a", 7)],
        sink: "dup",
        needs_external: false,
    },
    Fixture {
        name: "masked-16bit",
        description: "input masked and with constant bits set",
        source: include_str!("../../fixtures/masked-16bit.toy"),
        input: &[("i", 0x1234)],
        sink: "masked",
        needs_external: false,
    },
];

impl Fixture {
    pub fn program(&self) -> ToyProgram {
        ToyProgram::parse(self.source).expect("built-in fixtures parse")
    }

    pub fn input(&self) -> ToyInput {
        self.input.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    /// Symbolic state at the first hit of `sink` (default: the fixture's).
    pub fn sink_state(&self, sink: Option<&str>) -> Result<SinkState, ToyError> {
        let label = sink.unwrap_or(self.sink);
        symbolic_single_path(&self.program(), &self.input())?
            .into_iter()
            .find(|s| s.label == label)
            .ok_or_else(|| ToyError::SinkNotReached(label.to_string()))
    }
}

pub fn builtin_fixtures() -> &'static [Fixture] {
    FIXTURES
}

pub fn fixture(name: &str) -> Result<&'static Fixture, ToyError> {
    FIXTURES.iter().find(|f| f.name == name).ok_or_else(|| ToyError::UnknownFixture(name.to_string()))
}
