pub mod gen;
pub mod rational_lp;
