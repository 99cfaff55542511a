pub mod callgraph;
pub mod datalog;
pub mod driver;
pub mod hybrid;
pub mod osl;
pub mod property;
pub mod sdg;
