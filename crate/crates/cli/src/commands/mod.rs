pub mod allocate;
pub mod bracket_cmd;
pub mod corpus_cmd;
pub mod curves;
pub mod edge_cmd;
pub mod static_cmd;
pub mod sweep_cmd;
