//! Reference models shipped with the crate.

/// A single inverter with a pass-through fault.
pub const INV1: &str = include_str!("../fixtures/inv1.smdl");
/// Two inverters in series.
pub const INV2: &str = include_str!("../fixtures/inv2.smdl");
/// A hierarchical box wrapping the two-inverter chain.
pub const GBOX: &str = include_str!("../fixtures/gbox.smdl");
/// XOR/AND/OR gate network with stuck-at-0 faults.
pub const FIG1: &str = include_str!("../fixtures/fig1.smdl");

/// All fixtures as `(name, text)` pairs.
pub const ALL: [(&str, &str); 4] = [("inv1", INV1), ("inv2", INV2), ("gbox", GBOX), ("fig1", FIG1)];
