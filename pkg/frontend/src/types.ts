/** Wire types of the editing service (see the service's JSON endpoints). */

export type Vec3 = [number, number, number];

export interface SessionInfo {
  session_id: string;
  level_sizes: number[];
  bounding_box: { min: Vec3; max: Vec3 };
  n_faces: number;
}

export interface ProxyLevelData {
  positions: Vec3[];
  normals: Vec3[];
  parents: number[];
  residuals: number[];
}

export interface SceneStateData {
  level: number;
  level_sizes: number[];
  dirty: boolean;
  vertices: Vec3[];
  faces: [number, number, number][];
  colors: Vec3[];
  proxies: ProxyLevelData;
}

export interface DragEditBody {
  type: "drag";
  level: number;
  point_index: number;
  displacement: Vec3;
  tau: number;
  scope: "subtree" | "global";
}

export interface TransferEditBody {
  type: "transfer";
  level: number;
  source_indices: number[];
  target_indices: number[];
  k_neighbors: number;
}

export type EditBody = DragEditBody | TransferEditBody;

export interface EditDiff {
  type: "drag" | "transfer";
  changed_indices: number[];
  new_positions: Vec3[];
  changed_color_indices: number[];
  new_colors: Vec3[];
  dirty: boolean;
  script_line: string;
}

export interface UndoResult {
  undo_depth: number;
  script_length: number;
  dirty: boolean;
}

export class ServiceError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}
