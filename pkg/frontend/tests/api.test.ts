import { describe, expect, it } from "vitest";

import { ApiClient, ApiRequestError } from "../src/api.js";
import type { QueryResponseJson } from "../src/types.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("api client", () => {
  it("surfaces 422 validation errors with their field path", async () => {
    const client = new ApiClient("http://svc", async () =>
      jsonResponse(422, {
        code: "invalid_query",
        message: "points must list at least 2 samples",
        fieldPath: "visualQuery.objects[0].segments[0].points",
      })
    );
    const error = await client
      .runQuery({ datasetId: "d", visualQuery: {} as never })
      .then(() => null, (e) => e);
    expect(error).toBeInstanceOf(ApiRequestError);
    expect((error as ApiRequestError).status).toBe(422);
    expect((error as ApiRequestError).fieldPath).toBe(
      "visualQuery.objects[0].segments[0].points"
    );
  });

  it("parses successful query responses", async () => {
    const payload: QueryResponseJson = {
      queryId: "q1",
      datasetId: "d1",
      results: [
        {
          startFrame: 4,
          endFrame: 23,
          objectIds: ["7"],
          score: 0.93,
          tracks: [
            {
              objectId: "7",
              objectType: "car",
              values: [[0.1, 0.2, 0.05, 0.05], [0.3, 0.2, 0.05, 0.05]],
              mask: [true, true],
            },
          ],
        },
      ],
      queryEcho: {
        visualQuery: {
          schemaVersion: 1, canvasW: 1, canvasH: 1, objects: [],
        },
        spanFrames: 20,
        k: 10,
      },
    };
    const calls: string[] = [];
    const client = new ApiClient("http://svc", async (input) => {
      calls.push(input);
      return jsonResponse(200, payload);
    });
    const body = await client.runQuery({
      datasetId: "d1",
      visualQuery: payload.queryEcho.visualQuery,
    });
    expect(calls).toEqual(["http://svc/queries"]);
    expect(body.results[0]!.score).toBeCloseTo(0.93);
  });

  it("wraps non-JSON failures into a generic error", async () => {
    const client = new ApiClient("http://svc", async () =>
      new Response("<html>busted</html>", { status: 500 })
    );
    const error = await client.getDatasets().then(() => null, (e) => e);
    expect(error).toBeInstanceOf(ApiRequestError);
    expect((error as ApiRequestError).code).toBe("http_error");
  });

  it("lists types and datasets", async () => {
    const client = new ApiClient("http://svc", async (input) => {
      if (input.endsWith("/types")) return jsonResponse(200, { types: ["car", "person"] });
      return jsonResponse(200, { datasets: [] });
    });
    expect(await client.getTypes()).toEqual(["car", "person"]);
    expect(await client.getDatasets()).toEqual([]);
  });
});
