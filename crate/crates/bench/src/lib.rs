//! Shared inputs for the benchmarks.

use forge_core::frame::{FramePosition, FramedLindbladian};
use forge_core::scenarios::Preset;
use forge_core::{GatePreset, LindbladModel};

/// Gate and model of a preset scenario.
pub fn fixture(preset: Preset) -> (GatePreset, LindbladModel) {
    preset.config().build().expect("presets are valid")
}

/// Interaction-frame generator of a preset with the noise on the left.
pub fn frame(preset: Preset) -> FramedLindbladian {
    let (gate, model) = fixture(preset);
    FramedLindbladian::new(&model, &gate, FramePosition::Left.time_shift(gate.tau())).expect("frame builds")
}
