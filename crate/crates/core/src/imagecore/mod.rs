//! Raster types, component analysis, resampling and file formats shared by
//! every stage.

mod io;
mod raster;
mod region;
mod resize;
mod tensor;

pub(crate) use io::to_byte;
pub use io::{load_mask_png, load_png, save_gray8_png, save_image_png, save_mask_png, save_rgb8_png};
pub use raster::{BinaryMask, Grid, Image};
pub use region::{
    connected_components, label_components, region_to_mask, regions_to_mask, BBox, Connectivity, Region, RegionRecord,
    RegionSet,
};
pub use resize::{resize, resize_grid, resize_mask, ResizeMode};
pub use tensor::{read_tensor, write_tensor, TensorFile, TENSOR_MAGIC};
