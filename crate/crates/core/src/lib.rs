//! Detection of user-entered personal information leaks in decompiled
//! Android-style app bundles.

pub mod ir;
pub mod gui;
pub mod pi;
pub mod sourcesink;
pub mod taint;
pub mod analysis;
pub mod report;
pub mod fixture;
