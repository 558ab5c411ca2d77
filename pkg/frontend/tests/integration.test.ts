// @vitest-environment node
//
// End-to-end checks against a running service instance. Skipped unless
// ONTODISTILL_API_BASE points at one, e.g.
//
//   ontodistill serve --data-dir /tmp/ui-itest --port 8740 &
//   ONTODISTILL_API_BASE=http://127.0.0.1:8740 npm test
//
// The session replays the bundled hierarchy transcript, whose entries
// carry no prompt hashes and therefore match by position alone. That is
// what lets the template-edit scenario run against canned responses.
import { readFileSync } from "node:fs";
import { resolve } from "node:path";
import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/api/client";
import { TASK_KINDS } from "../src/api/types";
import type { SessionSummary } from "../src/api/types";

const base = process.env.ONTODISTILL_API_BASE;
const fixtures = resolve(
  process.env.ONTODISTILL_FIXTURES ?? "../tests/fixtures",
);

describe.skipIf(!base)("against a live service", () => {
  const client = new ApiClient(base);
  let session: SessionSummary;

  it("creates a replay session from the bundled fixtures", async () => {
    session = await client.createSession({
      seed_dot: readFileSync(resolve(fixtures, "seed.dot"), "utf8"),
      config: {
        domain_label: "autonomous driving",
        mode: "supervised",
        stopping: { max_iterations: 10 },
      },
      transport: {
        mode: "replay",
        transcript_path: resolve(fixtures, "hierarchy_run.jsonl"),
      },
      session_id: `ui-itest-${Date.now()}`,
    });
    expect(session.stats.concept_count).toBeGreaterThan(0);
    expect(session.runs.hierarchy.status).toBe("Idle");
  });

  it("serves a workspace for each of the four tasks", async () => {
    for (const kind of TASK_KINDS) {
      const log = await client.getLog(session.id, kind);
      expect(log.run.kind).toBe(kind);
      const template = await client.getTemplate(session.id, kind);
      expect(template.context).not.toBe("");
      expect(template.instruction).not.toBe("");
      expect(template.format_spec).not.toBe("");
    }
    const doc = await client.getOntology(session.id);
    expect(doc.concepts.length).toBe(session.stats.concept_count);
  });

  it("logs the edited instruction in the next prompt", async () => {
    const template = await client.getTemplate(session.id, "hierarchy");
    const marker = "Focus on physically distinct road users only.";
    await client.putTemplate(session.id, "hierarchy", {
      context: template.context,
      instruction: `${template.instruction}\n${marker}`,
      format_spec: template.format_spec,
    });

    await client.step(session.id, "hierarchy");
    const log = await client.getLog(session.id, "hierarchy");
    const last = log.iterations[log.iterations.length - 1];
    expect(last.prompt.text).toContain(marker);
    expect(log.run.status).toBe("AwaitingReview");

    await client.control(session.id, { command: "accept", task: "hierarchy" });
  });

  it("parks the transcript's defective iteration with both violations", async () => {
    // Entries 2 through 9 are clean; entry 10 introduces a concept with
    // two parents and a two-concept subclass cycle.
    for (let i = 2; i <= 9; i += 1) {
      await client.step(session.id, "hierarchy");
      await client.control(session.id, {
        command: "accept",
        task: "hierarchy",
      });
    }
    const result = await client.step(session.id, "hierarchy");
    expect(result.run.status).toBe("AwaitingReview");
    expect(result.iteration).not.toBeNull();
    const violations = result.iteration?.validation?.violations ?? [];
    const rules = violations.map((v) => v.rule).sort();
    expect(rules).toContain("MultiParent");
    expect(rules).toContain("Cycle");
    const details = violations.map((v) => v.detail).join("; ");
    expect(details).toContain("Car");
    expect(details).toContain("Crosswalk User");

    await client.control(session.id, {
      command: "accept_with_edits",
      task: "hierarchy",
      edits: [
        { op: "remove_concept", ref: "Electric" },
        { op: "remove_concept", ref: "Crosswalk User" },
      ],
    });
    const doc = await client.getOntology(session.id);
    expect(doc.concepts.some((c) => c.display_name === "Electric")).toBe(false);
  });

  it("reverts the ontology to an earlier accepted iteration", async () => {
    const before = await client.getOntology(session.id);
    await client.control(session.id, {
      command: "revert",
      task: "hierarchy",
      to_iteration: 5,
    });
    const after = await client.getOntology(session.id);
    expect(after.concepts.length).toBeLessThan(before.concepts.length);

    const log = await client.getLog(session.id, "hierarchy");
    for (const iteration of log.iterations) {
      if (iteration.index > 5 && iteration.decision !== "Repeated") {
        expect(iteration.decision).toBe("Reverted");
      }
    }
  });
});
