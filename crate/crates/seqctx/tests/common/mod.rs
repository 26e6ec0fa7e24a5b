#![allow(dead_code)]

pub mod fuzz;
