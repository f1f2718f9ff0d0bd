import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    testTimeout: 30_000,
    hookTimeout: 120_000,
    // The live-session test drives real subprocesses; keep files sequential
    // so two tests never race for the same CPU-heavy key generation.
    fileParallelism: false,
  },
});
