import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    testTimeout: 30000,
    hookTimeout: 30000,
    // The integration suite spawns one gateway process; keep files sequential.
    fileParallelism: false,
  },
});
