// three.js GLB viewer. The scene arrives with the placement on the eyewear
// node's TRS, so swapping models is a pure load; no client-side fitting.

import * as THREE from "three";
import { GLTFLoader } from "three/examples/jsm/loaders/GLTFLoader.js";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";

export class ModelViewer {
  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private controls: OrbitControls;
  private loader = new GLTFLoader();
  private current: THREE.Object3D | null = null;
  private loadSeq = 0;

  constructor(private container: HTMLElement) {
    this.renderer = new THREE.WebGLRenderer({ antialias: true, alpha: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    container.appendChild(this.renderer.domElement);

    this.camera = new THREE.PerspectiveCamera(40, 1, 1, 5000);
    this.camera.position.set(0, 40, 420);

    this.scene.add(new THREE.AmbientLight(0xffffff, 0.7));
    const key = new THREE.DirectionalLight(0xffffff, 1.6);
    key.position.set(120, 200, 300);
    this.scene.add(key);
    const fill = new THREE.DirectionalLight(0x8899bb, 0.5);
    fill.position.set(-200, 50, -100);
    this.scene.add(fill);

    this.controls = new OrbitControls(this.camera, this.renderer.domElement);
    this.controls.enableDamping = true;

    new ResizeObserver(() => this.resize()).observe(container);
    this.resize();
    this.renderer.setAnimationLoop(() => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    });
  }

  private resize() {
    const w = this.container.clientWidth || 1;
    const h = this.container.clientHeight || 1;
    this.renderer.setSize(w, h, false);
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
  }

  /** Load a GLB URL, replacing the current model once it is ready. */
  async show(url: string): Promise<void> {
    const seq = ++this.loadSeq;
    const gltf = await this.loader.loadAsync(url);
    if (seq !== this.loadSeq) return; // superseded while downloading
    if (this.current) this.scene.remove(this.current);
    this.current = gltf.scene;
    this.scene.add(gltf.scene);
    this.frame(gltf.scene);
  }

  private frame(object: THREE.Object3D) {
    const box = new THREE.Box3().setFromObject(object);
    const center = box.getCenter(new THREE.Vector3());
    const size = box.getSize(new THREE.Vector3()).length();
    this.controls.target.copy(center);
    const direction = new THREE.Vector3(0.15, 0.1, 1).normalize();
    this.camera.position.copy(center.clone().add(direction.multiplyScalar(size * 1.2)));
    this.camera.near = size / 100;
    this.camera.far = size * 10;
    this.camera.updateProjectionMatrix();
  }
}
