/**
 * Wire protocol types and validation for the external-policy stdio channel.
 *
 * One JSON object per line in each direction:
 *
 *   -> {"type": "hello", "schema_version": 1}
 *   <- {"type": "hello", "schema_version": 1}
 *   -> {"type": "decide", "id": n, "ego": {px, py, theta, v}, "history": [...]}
 *   <- {"type": "decision", "id": n, "waypoints": [[x, y] * 40]}
 *   <- {"type": "error", "code": "...", "message": "..."}
 */

export const SCHEMA_VERSION = 1;
export const WAYPOINT_COUNT = 40;
export const FRAME_DT = 0.1;

export interface EgoState {
  px: number;
  py: number;
  theta: number;
  v: number;
}

export interface HelloRequest {
  type: "hello";
  schema_version: number;
}

export interface DecideRequest {
  type: "decide";
  id: number;
  ego: EgoState;
  history?: unknown[];
}

export type Request = HelloRequest | DecideRequest;

export interface HelloReply {
  type: "hello";
  schema_version: number;
}

export interface DecisionReply {
  type: "decision";
  id: number;
  waypoints: number[][];
}

export interface ErrorReply {
  type: "error";
  code: string;
  message: string;
}

export type Reply = HelloReply | DecisionReply | ErrorReply;

export class ProtocolError extends Error {
  constructor(readonly code: string, message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function parseEgo(raw: unknown): EgoState {
  if (typeof raw !== "object" || raw === null) {
    throw new ProtocolError("bad-ego", "ego must be an object");
  }
  const ego = raw as Record<string, unknown>;
  for (const key of ["px", "py", "theta", "v"]) {
    if (!isFiniteNumber(ego[key])) {
      throw new ProtocolError("bad-ego", `ego.${key} must be a finite number`);
    }
  }
  return {
    px: ego.px as number,
    py: ego.py as number,
    theta: ego.theta as number,
    v: ego.v as number,
  };
}

/** Parse one request line; throws ProtocolError on anything malformed. */
export function parseRequest(line: string): Request {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError("bad-json", `unparseable request line: ${err}`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new ProtocolError("bad-request", "request must be a JSON object");
  }
  const msg = raw as Record<string, unknown>;
  if (msg.type === "hello") {
    if (msg.schema_version !== SCHEMA_VERSION) {
      throw new ProtocolError(
        "bad-version",
        `unsupported schema_version ${msg.schema_version}`,
      );
    }
    return { type: "hello", schema_version: SCHEMA_VERSION };
  }
  if (msg.type === "decide") {
    if (!isFiniteNumber(msg.id)) {
      throw new ProtocolError("bad-request", "decide.id must be a number");
    }
    return {
      type: "decide",
      id: msg.id,
      ego: parseEgo(msg.ego),
      history: Array.isArray(msg.history) ? msg.history : [],
    };
  }
  throw new ProtocolError("bad-request", `unknown request type ${msg.type}`);
}
