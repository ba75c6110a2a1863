//! File formats and the command-line front end of the `adaptmesh` generator.

pub mod app;
pub mod input;
pub mod output;

pub use input::{parse_domain, DomainFormat, InputError};
pub use output::{parse_json_mesh, render_svg, write_json, write_mesh, write_msh2, ColorBy, MeshFormat};
