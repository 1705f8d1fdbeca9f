//! Simulated RAM under test.

use thiserror::Error;

/// Widest supported cell.
pub const MAX_WORD_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("address {address} out of range for {n_cells} cells")]
    Address { address: usize, n_cells: usize },
    #[error("value {value:#x} does not fit in a {word_bits}-bit cell")]
    Value { value: u32, word_bits: u32 },
    #[error("invalid memory geometry: {0}")]
    Spec(&'static str),
}

/// Geometry of the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemorySpec {
    pub n_cells: usize,
    pub word_bits: u32,
    pub read_ports: u32,
    pub write_ports: u32,
}

impl MemorySpec {
    pub fn new(n_cells: usize, word_bits: u32, read_ports: u32) -> Result<Self, MemoryError> {
        let spec = Self {
            n_cells,
            word_bits,
            read_ports,
            write_ports: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Single-port bit-oriented array.
    pub fn bits(n_cells: usize) -> Self {
        Self {
            n_cells,
            word_bits: 1,
            read_ports: 1,
            write_ports: 1,
        }
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.n_cells == 0 {
            return Err(MemoryError::Spec("n_cells must be positive"));
        }
        if self.word_bits == 0 || self.word_bits > MAX_WORD_BITS {
            return Err(MemoryError::Spec("word_bits must be in 1..=16"));
        }
        if !(1..=2).contains(&self.read_ports) {
            return Err(MemoryError::Spec("read_ports must be 1 or 2"));
        }
        if self.write_ports != 1 {
            return Err(MemoryError::Spec("write_ports must be 1"));
        }
        Ok(())
    }

    pub fn word_mask(&self) -> u32 {
        (1u32 << self.word_bits) - 1
    }
}

/// Cycles consumed by one push step of a `k`-stage register: all `k` reads
/// spread over the read ports, then one write.
pub fn cycles_per_step(k: usize, read_ports: u32) -> u64 {
    (k as u64).div_ceil(read_ports as u64) + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessOp {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRecord {
    pub op: AccessOp,
    pub address: usize,
    /// Value returned by a read, or the value requested by a write.
    pub value: u32,
    pub cycle: u64,
    /// Indices of fault instances that perturbed this access.
    pub faults: Vec<usize>,
}

impl AccessRecord {
    /// The part of the record that two equivalent runs must agree on.
    pub fn key(&self) -> (AccessOp, usize, u32) {
        (self.op, self.address, self.value)
    }
}

#[derive(Debug, Clone)]
pub struct MemoryState {
    spec: MemorySpec,
    cells: Vec<u32>,
    trace: Vec<AccessRecord>,
    cycle: u64,
}

impl MemoryState {
    pub fn new(spec: MemorySpec, fill: u32) -> Result<Self, MemoryError> {
        spec.validate()?;
        if fill > spec.word_mask() {
            return Err(MemoryError::Value {
                value: fill,
                word_bits: spec.word_bits,
            });
        }
        Ok(Self {
            spec,
            cells: vec![fill; spec.n_cells],
            trace: Vec::new(),
            cycle: 0,
        })
    }

    pub fn spec(&self) -> &MemorySpec {
        &self.spec
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn trace(&self) -> &[AccessRecord] {
        &self.trace
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn advance(&mut self, cycles: u64) {
        self.cycle += cycles;
    }

    pub fn check_address(&self, address: usize) -> Result<(), MemoryError> {
        if address >= self.cells.len() {
            Err(MemoryError::Address {
                address,
                n_cells: self.cells.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn check_value(&self, value: u32) -> Result<(), MemoryError> {
        if value > self.spec.word_mask() {
            Err(MemoryError::Value {
                value,
                word_bits: self.spec.word_bits,
            })
        } else {
            Ok(())
        }
    }

    pub fn read(&mut self, address: usize) -> Result<u32, MemoryError> {
        self.check_address(address)?;
        let value = self.cells[address];
        self.record(AccessOp::Read, address, value, Vec::new());
        Ok(value)
    }

    pub fn write(&mut self, address: usize, value: u32) -> Result<(), MemoryError> {
        self.check_address(address)?;
        self.check_value(value)?;
        self.cells[address] = value;
        self.record(AccessOp::Write, address, value, Vec::new());
        Ok(())
    }

    /// Overwrite every cell without touching the trace (power-on background).
    pub fn fill(&mut self, value: u32) -> Result<(), MemoryError> {
        self.check_value(value)?;
        self.cells.fill(value);
        Ok(())
    }

    pub fn clear_trace(&mut self) {
        self.trace.clear();
    }

    // Raw accessors for the fault layer; callers must have range-checked.
    pub(crate) fn peek(&self, address: usize) -> u32 {
        self.cells[address]
    }

    pub(crate) fn poke(&mut self, address: usize, value: u32) {
        self.cells[address] = value;
    }

    pub(crate) fn record(&mut self, op: AccessOp, address: usize, value: u32, faults: Vec<usize>) {
        self.trace.push(AccessRecord {
            op,
            address,
            value,
            cycle: self.cycle,
            faults,
        });
    }
}

/// Create an array with every cell set to `fill`.
pub fn mem_new(spec: MemorySpec, fill: u32) -> Result<MemoryState, MemoryError> {
    MemoryState::new(spec, fill)
}
