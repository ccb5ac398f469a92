import type { Readable, Writable } from "node:stream";
import { createInterface } from "node:readline";

import { constantVelocityWaypoints } from "./decision.js";
import { ProtocolError, parseRequest, type Reply } from "./protocol.js";

/**
 * Single-threaded request/response loop: answers the hello handshake, then
 * maps each decide request to a constant-velocity decision computed from
 * the request's ego speed.  Malformed lines produce an error reply and the
 * session keeps serving; EOF resolves the returned promise.
 */
export function serve(input: Readable, output: Writable): Promise<void> {
  const send = (reply: Reply) => {
    output.write(JSON.stringify(reply) + "\n");
  };

  return new Promise((resolve) => {
    const lines = createInterface({ input, crlfDelay: Infinity });
    lines.on("line", (line) => {
      if (line.trim() === "") {
        return;
      }
      let request;
      try {
        request = parseRequest(line);
      } catch (err) {
        if (err instanceof ProtocolError) {
          send({ type: "error", code: err.code, message: err.message });
          return;
        }
        throw err;
      }
      if (request.type === "hello") {
        send({ type: "hello", schema_version: request.schema_version });
        return;
      }
      send({
        type: "decision",
        id: request.id,
        waypoints: constantVelocityWaypoints(request.ego.v),
      });
    });
    lines.on("close", () => resolve());
  });
}
