/** Wire types shared with the query service (schemaVersion 1). */

export interface SegmentJson {
  panelStart: number;
  panelEnd: number;
  points: [number, number][];
}

export interface QueryObjectJson {
  id: string;
  type: string;
  nominalW: number;
  nominalH: number;
  segments: SegmentJson[];
}

export interface VisualQueryJson {
  schemaVersion: 1;
  canvasW: number;
  canvasH: number;
  objects: QueryObjectJson[];
}

export interface SearchOverridesJson {
  strideFrames?: number;
  lengthFactors?: number[];
  nmsIou?: number;
  maxAssignmentsPerWindow?: number;
  ticksPerSecond?: number;
}

export interface QueryRequestJson {
  datasetId: string;
  visualQuery: VisualQueryJson;
  k?: number;
  searchOverrides?: SearchOverridesJson;
}

export interface TrackPreviewJson {
  objectId: string;
  objectType: string;
  /** T rows of normalized [cx, cy, w, h]. */
  values: [number, number, number, number][];
  mask: boolean[];
}

export interface MatchResultJson {
  startFrame: number;
  endFrame: number;
  objectIds: string[];
  score: number;
  tracks: TrackPreviewJson[];
}

export interface QueryResponseJson {
  queryId: string;
  datasetId: string;
  results: MatchResultJson[];
  queryEcho: {
    visualQuery: VisualQueryJson;
    spanFrames: number;
    k: number;
  };
}

export interface DatasetInfoJson {
  datasetId: string;
  name: string;
  fps: number;
  frameCount: number;
  objectCount: number;
  typeHistogram: Record<string, number>;
}

export interface ApiErrorJson {
  code: string;
  message: string;
  fieldPath?: string;
}
