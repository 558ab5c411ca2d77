import { defineConfig } from "vitest/config";
import react from "@vitejs/plugin-react";

// The UI talks to the distillation service through /api so the browser
// never needs CORS; dev and preview proxy that prefix to a locally
// running `ontodistill serve`. Point ONTODISTILL_API at a different
// origin to proxy elsewhere.
const apiTarget = process.env.ONTODISTILL_API ?? "http://127.0.0.1:8000";

const proxy = {
  "/api": {
    target: apiTarget,
    changeOrigin: true,
    rewrite: (path: string) => path.replace(/^\/api/, ""),
  },
};

export default defineConfig({
  plugins: [react()],
  server: { proxy },
  preview: { proxy },
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.{ts,tsx}"],
    setupFiles: ["tests/support/setup.ts"],
  },
});
