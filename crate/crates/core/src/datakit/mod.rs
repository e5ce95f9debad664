//! Clip storage (`SKIDVOL1` volumes and label CSVs), dataset manifests,
//! the synthetic dataset generator and subsetting helpers.

mod import;
mod manifest;
mod synth;
mod volume;

pub use import::{import_image_dir, IMPORT_SIDE, MIN_FRAME_SIDE};
pub use manifest::{
    clip_path, kneemri_binary, labels_path, oversample_minority, read_labels, resolve_data_root,
    subset_for_label_efficiency, write_labels, ClipEntry, DatasetManifest, LabelSchema, Split, DATA_ROOT_ENV,
};
pub use synth::{
    assign_labels, generate_synthetic_dataset, positive_counts, synth_clip, SplitSummary, SyntheticSpec,
    SyntheticSummary, MRNET_TRAIN_CLIPS, MRNET_TRAIN_POSITIVES,
};
pub use volume::{
    check_clip_file, load_clip, save_clip, ClipVolume, DType, VolumeData, VolumeHeader, SKIDVOL_HEADER_LEN,
    SKIDVOL_MAGIC,
};
