import { afterEach } from "vitest";
import { cleanup } from "@testing-library/react";

(globalThis as Record<string, unknown>).IS_REACT_ACT_ENVIRONMENT = true;

afterEach(() => {
  cleanup();
  if (typeof window !== "undefined") {
    window.location.hash = "";
  }
});
