pub mod eval;
pub mod gen_pool;
pub mod simulate;
pub mod theory;
