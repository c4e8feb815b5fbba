#![allow(dead_code)]
pub mod checks;
pub mod grad_suite;
pub mod oracles;
