//! Size limits for dense matrix construction.

use crate::error::{ForgeError, Result};

/// Largest qubit count for which dense matrices are ever built.
pub const HARD_QUBIT_CAP: usize = 6;

/// Environment variable that lowers the qubit cap.
pub const QUBIT_CAP_ENV: &str = "FORGE_MAX_QUBITS";

/// Current qubit cap: `FORGE_MAX_QUBITS` if set and parseable, clamped to [`HARD_QUBIT_CAP`].
pub fn qubit_cap() -> usize {
    std::env::var(QUBIT_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map_or(HARD_QUBIT_CAP, |v| v.min(HARD_QUBIT_CAP))
}

pub fn check_qubits(n: usize) -> Result<()> {
    let cap = qubit_cap();
    if n > cap {
        return Err(ForgeError::QubitCap { n, cap });
    }
    Ok(())
}
