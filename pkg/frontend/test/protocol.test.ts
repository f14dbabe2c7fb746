import { describe, expect, it } from "vitest";

import { encodeFrame, FrameDecoder, type ServerFrame } from "../src/protocol.js";

const hello: ServerFrame = { type: "Hello", protocol: 1, scenario: "s", tick: 0 };

describe("frame encoding", () => {
  it("prefixes a 4-byte big-endian length", () => {
    const frame = encodeFrame(hello);
    expect(frame.readUInt32BE(0)).toBe(frame.length - 4);
    expect(JSON.parse(frame.subarray(4).toString("utf-8"))).toEqual(hello);
  });

  it("roundtrips through the decoder", () => {
    const decoder = new FrameDecoder();
    expect(decoder.push(encodeFrame(hello))).toEqual([hello]);
  });

  it("handles fragmented and coalesced chunks", () => {
    const decoder = new FrameDecoder();
    const a = encodeFrame(hello);
    const b = encodeFrame({ type: "Ack", cmd_id: "c1", result: {} });
    const joined = Buffer.concat([a, b]);
    const got: ServerFrame[] = [];
    // feed awkward splits: mid-header and mid-payload
    for (const cut of [2, 5, joined.length - 3]) {
      got.push(...decoder.push(joined.subarray(cut === 2 ? 0 : undefined, 0))); // no-op
    }
    got.push(...decoder.push(joined.subarray(0, 2)));
    got.push(...decoder.push(joined.subarray(2, 7)));
    got.push(...decoder.push(joined.subarray(7, joined.length - 3)));
    got.push(...decoder.push(joined.subarray(joined.length - 3)));
    expect(got).toEqual([hello, { type: "Ack", cmd_id: "c1", result: {} }]);
  });

  it("decodes many frames from one chunk", () => {
    const decoder = new FrameDecoder();
    const frames = [hello, { type: "Event", record: { tick: 1, seq: 0, source: "x", type: "T", payload: {} } }];
    const chunk = Buffer.concat(frames.map((f) => encodeFrame(f)));
    expect(decoder.push(chunk)).toEqual(frames);
  });
});
