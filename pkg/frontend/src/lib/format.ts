import type { DeltaDoc, RunDoc } from "../api/types";

export function shortChecksum(checksum: string): string {
  return checksum.slice(0, 12);
}

export function describeDelta(delta: DeltaDoc): string {
  const parts: string[] = [];
  const count = (n: number, noun: string, sign: string) =>
    parts.push(`${sign}${n} ${noun}${n === 1 ? "" : "s"}`);
  if (delta.added_concepts.length) {
    count(delta.added_concepts.length, "concept", "+");
  }
  if (delta.removed_concepts.length) {
    count(delta.removed_concepts.length, "concept", "−");
  }
  if (delta.redefined_concepts.length) {
    count(delta.redefined_concepts.length, "definition", "~");
  }
  if (delta.added_edges.length) {
    count(delta.added_edges.length, "edge", "+");
  }
  if (delta.removed_edges.length) {
    count(delta.removed_edges.length, "edge", "−");
  }
  if (delta.added_triples.length) {
    count(delta.added_triples.length, "triple", "+");
  }
  if (delta.removed_triples.length) {
    count(delta.removed_triples.length, "triple", "−");
  }
  return parts.length ? parts.join(", ") : "no change";
}

export function runBadge(run: RunDoc): string {
  if (run.status === "Completed" && run.stop_reason) {
    return `Completed (${run.stop_reason})`;
  }
  return run.status;
}

export function formatTimestamp(iso: string): string {
  const date = new Date(iso);
  if (Number.isNaN(date.getTime())) {
    return iso;
  }
  return date.toISOString().replace("T", " ").slice(0, 19);
}
