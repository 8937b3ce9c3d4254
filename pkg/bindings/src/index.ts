export { VktError, VktUsageError } from "./errors.js";
export {
  BYTES_PER_CELL,
  MAGIC,
  STRUCTURED_HEADER_SIZE,
  cellCount,
  decodeVolume,
  encodeVolume,
} from "./format.js";
export type {
  DataFormatName,
  HierarchicalHeader,
  StructuredHeader,
  SubgridMeta,
  ValueRange,
  Vec3,
  VolumeHeader,
} from "./format.js";
export { BoundVolume } from "./volume.js";
export type { CellArray } from "./volume.js";
export { getExecutionPolicy, runVkt, setExecutionPolicy, vktBinary } from "./cli.js";
export type { ExecutionPolicy } from "./cli.js";
export {
  aggregates,
  applyFilter,
  arithmetic,
  clahe,
  crop,
  deleteSlab,
  fill,
  fillRange,
  flip,
  histogram,
  info,
  renderToFile,
  resample,
  rotate,
  scale,
  zoom,
} from "./api.js";
export type {
  AggregatesReport,
  ArithmeticOp,
  ClaheOptions,
  FilterOptions,
  HistogramReport,
  InfoReport,
  RenderOptions,
  ResampleOptions,
  Roi,
  RotateOptions,
  ScaleOptions,
} from "./api.js";
