import { describe, expect, it } from "vitest";
import { ApiClient, ApiError } from "../src/api/client";

interface Captured {
  url: string;
  method: string;
  body?: unknown;
}

function clientCapturing(
  responder: (url: string) => { status: number; body: string; json?: boolean },
): { client: ApiClient; captured: Captured[] } {
  const captured: Captured[] = [];
  const client = new ApiClient("/api", async (url, init) => {
    captured.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    });
    const { status, body, json = true } = responder(url);
    return new Response(body, {
      status,
      headers: {
        "content-type": json ? "application/json" : "text/plain; charset=utf-8",
      },
    });
  });
  return { client, captured };
}

describe("ApiClient", () => {
  it("shapes step and control requests the way the service expects", async () => {
    const { client, captured } = clientCapturing(() => ({
      status: 200,
      body: JSON.stringify({ run: {}, checksum: "c" }),
    }));
    await client.step("abc", "hierarchy");
    await client.control("abc", {
      command: "revert",
      task: "hierarchy",
      to_iteration: 9,
    });
    expect(captured[0]).toMatchObject({
      url: "/api/sessions/abc/tasks/hierarchy/step",
      method: "POST",
    });
    expect(captured[1]).toMatchObject({
      url: "/api/sessions/abc/control",
      method: "POST",
      body: { command: "revert", task: "hierarchy", to_iteration: 9 },
    });
  });

  it("PUTs the full template body", async () => {
    const { client, captured } = clientCapturing(() => ({
      status: 200,
      body: JSON.stringify({ task: "definition" }),
    }));
    await client.putTemplate("abc", "definition", {
      context: "c",
      instruction: "i",
      format_spec: "f",
    });
    expect(captured[0]).toMatchObject({
      url: "/api/sessions/abc/prompt-template/definition",
      method: "PUT",
      body: { context: "c", instruction: "i", format_spec: "f" },
    });
  });

  it("requests the ontology as a document and DOT as text", async () => {
    const { client, captured } = clientCapturing((url) =>
      url.includes("format=dot")
        ? { status: 200, body: "digraph ontology {}", json: false }
        : { status: 200, body: "{}" },
    );
    await client.getOntology("abc");
    const dot = await client.exportDot("abc");
    expect(captured[0].url).toBe("/api/sessions/abc/ontology?format=doc");
    expect(captured[1].url).toBe("/api/sessions/abc/ontology?format=dot");
    expect(dot).toBe("digraph ontology {}");
  });

  it("maps the service's flat error body onto ApiError", async () => {
    const { client } = clientCapturing(() => ({
      status: 409,
      body: JSON.stringify({
        code: "replay_miss",
        message: "no transcript entry",
        detail: { sequence_no: 11 },
      }),
    }));
    const error = await client.step("abc", "hierarchy").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(409);
    expect(error.code).toBe("replay_miss");
    expect(error.detail).toEqual({ sequence_no: 11 });
  });

  it("keeps a non-JSON error body as the message", async () => {
    const { client } = clientCapturing(() => ({
      status: 502,
      body: "bad gateway",
      json: false,
    }));
    const error = await client.listSessions().catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.code).toBe("http_error");
    expect(error.message).toBe("bad gateway");
  });
});
