/** three.js scene: vertex-colored mesh, per-level proxy markers, orbit
 * camera, and a translate gizmo that commits one edit per drag release. */

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";
import { TransformControls } from "three/addons/controls/TransformControls.js";
import { markerStyle, SceneState } from "./state.js";
import { Vec3 } from "./types.js";

export interface ViewerCallbacks {
  onProxyPicked(index: number): void;
  onDragCommit(index: number, displacement: Vec3): void;
}

export class Viewer {
  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private orbit: OrbitControls;
  private gizmo: TransformControls;
  private mesh: THREE.Mesh | null = null;
  private markers: THREE.Points | null = null;
  private markerColors: Float32Array = new Float32Array(0);
  private handle = new THREE.Object3D();
  private ghost: THREE.Mesh;
  private raycaster = new THREE.Raycaster();
  private dragStart = new THREE.Vector3();
  private lastMeshRevision = -1;
  private lastMarkerRevision = -1;

  constructor(
    private canvas: HTMLCanvasElement,
    private state: SceneState,
    private callbacks: ViewerCallbacks,
  ) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setClearColor(0x10141c);
    this.camera = new THREE.PerspectiveCamera(40, 1, 0.05, 100);
    this.camera.position.set(1.6, 1.2, 2.2);
    this.orbit = new OrbitControls(this.camera, canvas);
    this.orbit.enableDamping = true;

    this.scene.add(new THREE.AmbientLight(0xffffff, 1.0));
    this.scene.add(this.handle);
    this.ghost = new THREE.Mesh(
      new THREE.SphereGeometry(1, 16, 12),
      new THREE.MeshBasicMaterial({ color: 0xffffff, transparent: true, opacity: 0.35 }),
    );
    this.ghost.visible = false;
    this.scene.add(this.ghost);

    this.gizmo = new TransformControls(this.camera, canvas);
    this.gizmo.setMode("translate");
    this.gizmo.attach(this.handle);
    this.gizmo.enabled = false;
    const gizmoRoot = this.gizmo.getHelper ? this.gizmo.getHelper() : (this.gizmo as unknown as THREE.Object3D);
    this.scene.add(gizmoRoot);
    gizmoRoot.visible = false;

    this.gizmo.addEventListener("dragging-changed", (event: { value?: unknown }) => {
      const dragging = Boolean(event.value);
      this.orbit.enabled = !dragging;
      if (dragging) {
        this.dragStart.copy(this.handle.position);
        this.ghost.visible = true;
      } else {
        this.ghost.visible = false;
        const delta = this.handle.position.clone().sub(this.dragStart);
        if (this.state.selectedProxy !== null && delta.lengthSq() > 0) {
          this.callbacks.onDragCommit(this.state.selectedProxy, [delta.x, delta.y, delta.z]);
        }
      }
    });
    this.gizmo.addEventListener("change", () => {
      if (this.ghost.visible) {
        this.ghost.position.copy(this.handle.position);
      }
    });

    canvas.addEventListener("pointerdown", (ev) => this.pick(ev));
    const loop = () => {
      requestAnimationFrame(loop);
      this.refreshIfNeeded();
      this.orbit.update();
      this.resize();
      this.renderer.render(this.scene, this.camera);
    };
    loop();
  }

  private resize(): void {
    const w = this.canvas.clientWidth;
    const h = this.canvas.clientHeight;
    if (this.canvas.width !== w || this.canvas.height !== h) {
      this.renderer.setSize(w, h, false);
      this.camera.aspect = w / h;
      this.camera.updateProjectionMatrix();
    }
  }

  private refreshIfNeeded(): void {
    if (this.state.meshRevision !== this.lastMeshRevision) {
      this.lastMeshRevision = this.state.meshRevision;
      this.rebuildMesh();
    }
    if (this.state.markerRevision !== this.lastMarkerRevision) {
      this.lastMarkerRevision = this.state.markerRevision;
      this.rebuildMarkers();
      this.syncGizmo();
    }
  }

  private rebuildMesh(): void {
    if (this.mesh) {
      this.scene.remove(this.mesh);
      this.mesh.geometry.dispose();
    }
    if (this.state.vertices.length === 0) {
      this.mesh = null;
      return;
    }
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.Float32BufferAttribute(this.state.vertices.flat(), 3));
    geometry.setAttribute("color", new THREE.Float32BufferAttribute(this.state.colors.flat(), 3));
    geometry.setIndex(this.state.faces.flat());
    const material = new THREE.MeshBasicMaterial({ vertexColors: true, side: THREE.DoubleSide });
    this.mesh = new THREE.Mesh(geometry, material);
    this.scene.add(this.mesh);
  }

  private rebuildMarkers(): void {
    if (this.markers) {
      this.scene.remove(this.markers);
      this.markers.geometry.dispose();
    }
    const positions = this.state.proxyPositions;
    if (positions.length === 0) {
      this.markers = null;
      return;
    }
    const style = markerStyle(this.state.activeLevel);
    const base = new THREE.Color(style.color);
    this.markerColors = new Float32Array(positions.length * 3);
    for (let i = 0; i < positions.length; i++) {
      this.paintMarker(i, base);
    }
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.Float32BufferAttribute(positions.flat(), 3));
    geometry.setAttribute("color", new THREE.BufferAttribute(this.markerColors, 3));
    const material = new THREE.PointsMaterial({
      size: style.size * 30,
      sizeAttenuation: true,
      vertexColors: true,
    });
    this.markers = new THREE.Points(geometry, material);
    this.scene.add(this.markers);
  }

  private paintMarker(i: number, base: THREE.Color): void {
    let color = base;
    if (this.state.selectedProxy === i) {
      color = new THREE.Color("#ffffff");
    } else if (this.state.sourceSelection.has(i)) {
      color = new THREE.Color("#3ddc64");
    } else if (this.state.targetSelection.has(i)) {
      color = new THREE.Color("#ff8a3d");
    }
    this.markerColors[i * 3] = color.r;
    this.markerColors[i * 3 + 1] = color.g;
    this.markerColors[i * 3 + 2] = color.b;
  }

  private syncGizmo(): void {
    const index = this.state.selectedProxy;
    const show = this.state.mode === "drag" && index !== null;
    this.gizmo.enabled = show;
    const gizmoRoot = this.gizmo.getHelper ? this.gizmo.getHelper() : (this.gizmo as unknown as THREE.Object3D);
    gizmoRoot.visible = show;
    if (show && index !== null && this.state.proxyPositions[index]) {
      const [x, y, z] = this.state.proxyPositions[index];
      this.handle.position.set(x, y, z);
      const style = markerStyle(this.state.activeLevel);
      this.ghost.scale.setScalar(style.size * 1.5);
    }
  }

  private pick(ev: PointerEvent): void {
    if (!this.markers || (this.gizmo as unknown as { dragging?: boolean }).dragging) {
      return;
    }
    const rect = this.canvas.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((ev.clientX - rect.left) / rect.width) * 2 - 1,
      -((ev.clientY - rect.top) / rect.height) * 2 + 1,
    );
    this.raycaster.setFromCamera(ndc, this.camera);
    this.raycaster.params.Points = { threshold: markerStyle(this.state.activeLevel).size * 2 };
    const hits = this.raycaster.intersectObject(this.markers);
    if (hits.length > 0 && hits[0].index !== undefined) {
      this.callbacks.onProxyPicked(hits[0].index);
    }
  }
}
