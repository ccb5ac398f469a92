import { FRAME_DT, WAYPOINT_COUNT } from "./protocol.js";

/**
 * Constant-velocity decision: hold the current speed along the ego x-axis.
 * Waypoint k (1-based) is (v * 0.1 * k, 0), matching the in-process
 * baseline on the other side of the protocol.
 */
export function constantVelocityWaypoints(v: number): number[][] {
  const waypoints: number[][] = [];
  for (let k = 1; k <= WAYPOINT_COUNT; k++) {
    waypoints.push([v * FRAME_DT * k, 0]);
  }
  return waypoints;
}
